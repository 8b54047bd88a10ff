//! Gaussian copula, rho in (-1, 1).
//!
//! The `_xy` functions take normal scores x = Phi^-1(u), y = Phi^-1(v) so the
//! likelihood can transform each argument once. The cdf uses the Genz
//! bivariate normal routine.

use crate::special::{bvn_cdf, norm_cdf, norm_pdf, norm_quantile};

pub fn cdf(rho: f64, u: f64, v: f64) -> f64 {
    bvn_cdf(norm_quantile(u), norm_quantile(v), rho)
}

pub fn hfunc_xy(rho: f64, x: f64, y: f64) -> f64 {
    norm_cdf((x - rho * y) / (1.0 - rho * rho).sqrt())
}

pub fn log_density_xy(rho: f64, x: f64, y: f64) -> f64 {
    let omr2 = 1.0 - rho * rho;
    -0.5 * omr2.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * omr2)
}

pub fn dlogc_du_xy(rho: f64, x: f64, y: f64) -> f64 {
    let omr2 = 1.0 - rho * rho;
    (-rho * (rho * x - y) / omr2) / norm_pdf(x)
}

pub fn dlogc_drho_xy(rho: f64, x: f64, y: f64) -> f64 {
    let omr2 = 1.0 - rho * rho;
    rho / omr2 + (x * y * (1.0 + rho * rho) - rho * (x * x + y * y)) / (omr2 * omr2)
}

pub fn dh_drho_xy(rho: f64, x: f64, y: f64) -> f64 {
    let omr2 = 1.0 - rho * rho;
    let z = (x - rho * y) / omr2.sqrt();
    norm_pdf(z) * (rho * x - y) / omr2.powf(1.5)
}

/// Closed-form inverse: u = Phi(sqrt(1-rho^2) Phi^-1(w) + rho Phi^-1(v)).
pub fn hinv(rho: f64, w: f64, v: f64) -> f64 {
    norm_cdf((1.0 - rho * rho).sqrt() * norm_quantile(w) + rho * norm_quantile(v))
}
