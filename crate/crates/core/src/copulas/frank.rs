//! Frank copula, theta in R \ {0}; negative dependence supported.
//!
//! With E = expm1(-t), a(x) = expm1(-t x) and D = E + a(u) a(v):
//! C(u,v) = -log1p(a(u) a(v)/E)/t, h(u,v) = e^(-t v) a(u)/D,
//! c(u,v) = -t E e^(-t(u+v))/D^2. D and E share their sign, so logs of
//! absolute values are safe. Callers handle |theta| < 1e-6 via the
//! independence limit, where the closed form cancels catastrophically.

use crate::special::debye1;

pub fn cdf(theta: f64, u: f64, v: f64) -> f64 {
    let e = (-theta).exp_m1();
    let au = (-theta * u).exp_m1();
    let av = (-theta * v).exp_m1();
    (-(au * av / e).ln_1p() / theta).clamp(0.0, 1.0)
}

pub fn hfunc(theta: f64, u: f64, v: f64) -> f64 {
    let e = (-theta).exp_m1();
    let au = (-theta * u).exp_m1();
    let av = (-theta * v).exp_m1();
    ((-theta * v).exp() * au / (e + au * av)).clamp(0.0, 1.0)
}

pub fn log_density(theta: f64, u: f64, v: f64) -> f64 {
    let e = (-theta).exp_m1();
    let au = (-theta * u).exp_m1();
    let av = (-theta * v).exp_m1();
    let d = e + au * av;
    (theta * e).abs().ln() - theta * (u + v) - 2.0 * d.abs().ln()
}

pub fn dlogc_du(theta: f64, u: f64, v: f64) -> f64 {
    let e = (-theta).exp_m1();
    let au = (-theta * u).exp_m1();
    let av = (-theta * v).exp_m1();
    let d = e + au * av;
    -theta + 2.0 * theta * (-theta * u).exp() * av / d
}

pub fn dlogc_dtheta(theta: f64, u: f64, v: f64) -> f64 {
    let e = (-theta).exp_m1();
    let eu = (-theta * u).exp();
    let ev = (-theta * v).exp();
    let au = eu - 1.0;
    let av = ev - 1.0;
    let d = e + au * av;
    let d_theta = -(-theta).exp() - u * eu * av - v * ev * au;
    // d/dt log(t (1 - e^-t)) = 1/t + e^-t/(1 - e^-t); note 1 - e^-t = -E
    1.0 / theta + (-theta).exp() / (-e) - (u + v) - 2.0 * d_theta / d
}

pub fn dh_dtheta(theta: f64, u: f64, v: f64) -> f64 {
    let e = (-theta).exp_m1();
    let eu = (-theta * u).exp();
    let ev = (-theta * v).exp();
    let au = eu - 1.0;
    let av = ev - 1.0;
    let d = e + au * av;
    let num = ev * au;
    let num_theta = -ev * (v * au + u * eu);
    let d_theta = -(-theta).exp() - u * eu * av - v * ev * au;
    (num_theta * d - num * d_theta) / (d * d)
}

/// Closed-form inverse: a(u) = w E / (e^(-t v) (1 - w) + w).
pub fn hinv(theta: f64, w: f64, v: f64) -> f64 {
    let e = (-theta).exp_m1();
    let denom = (-theta * v).exp() * (1.0 - w) + w;
    let au = w * e / denom;
    (-au.ln_1p() / theta).clamp(0.0, 1.0)
}

/// Kendall's tau: 1 - 4/t (1 - D1(t)), odd in t.
pub fn tau(theta: f64) -> f64 {
    if theta.abs() < 1e-8 {
        return theta / 9.0; // leading term of the expansion
    }
    let t = theta.abs();
    let val = 1.0 - 4.0 / t * (1.0 - debye1(t));
    val.copysign(theta)
}

/// Inverse tau by bisection over theta in [-50, 50]; tau is strictly
/// increasing in theta and has no closed inverse.
pub fn tau_to_param(target: f64) -> crate::error::Result<f64> {
    let max_tau = tau(50.0);
    if target.abs() >= max_tau {
        return Err(crate::error::Error::domain(format!(
            "Frank copula: |tau| = {} not achievable with theta in [-50, 50]",
            target.abs()
        )));
    }
    if target == 0.0 {
        return Ok(0.0);
    }
    let t = target.abs();
    let mut lo = 0.0_f64;
    let mut hi = 50.0_f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tau(mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).copysign(target))
}
