//! Clayton copula, theta > 0.
//!
//! C(u,v) = (u^-t + v^-t - 1)^(-1/t). Everything is evaluated in log space:
//! u^-t can overflow for large theta and small arguments, and near theta = 0
//! the naive sum loses the digits that the (-1/t) power then amplifies.

/// log(u^-t + v^-t - 1), stable for both tiny and large theta.
fn log_s(theta: f64, u: f64, v: f64) -> f64 {
    let a = -theta * u.ln();
    let b = -theta * v.ln();
    let m = a.max(b);
    if m < 0.5 {
        // S - 1 = expm1(a) + expm1(b) keeps full precision as theta -> 0
        (a.exp_m1() + b.exp_m1()).ln_1p()
    } else {
        m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln()
    }
}

/// d log S / d theta = (u^-t ln u + v^-t ln v) / (-S) expressed with the
/// shifted exponentials.
fn dlogs_dtheta(theta: f64, u: f64, v: f64) -> f64 {
    let (lu, lv) = (u.ln(), v.ln());
    let a = -theta * lu;
    let b = -theta * lv;
    let m = a.max(b).max(0.0);
    let s_shift = (a - m).exp() + (b - m).exp() - (-m).exp();
    -((a - m).exp() * lu + (b - m).exp() * lv) / s_shift
}

pub fn cdf(theta: f64, u: f64, v: f64) -> f64 {
    (-log_s(theta, u, v) / theta).exp()
}

pub fn hfunc(theta: f64, u: f64, v: f64) -> f64 {
    // dC/dv = v^(-t-1) S^(-1/t - 1)
    (-(theta + 1.0) * v.ln() - (1.0 / theta + 1.0) * log_s(theta, u, v)).exp()
}

pub fn log_density(theta: f64, u: f64, v: f64) -> f64 {
    (1.0 + theta).ln() - (theta + 1.0) * (u.ln() + v.ln())
        - (1.0 / theta + 2.0) * log_s(theta, u, v)
}

pub fn dlogc_du(theta: f64, u: f64, v: f64) -> f64 {
    let ls = log_s(theta, u, v);
    // (1+2t) u^(-t-1)/S - (t+1)/u
    (1.0 + 2.0 * theta) * (-(theta + 1.0) * u.ln() - ls).exp() - (theta + 1.0) / u
}

pub fn dlogc_dtheta(theta: f64, u: f64, v: f64) -> f64 {
    let ls = log_s(theta, u, v);
    let r = dlogs_dtheta(theta, u, v);
    1.0 / (1.0 + theta) - (u.ln() + v.ln()) + ls / (theta * theta)
        - (1.0 / theta + 2.0) * r
}

pub fn dh_dtheta(theta: f64, u: f64, v: f64) -> f64 {
    let ls = log_s(theta, u, v);
    let r = dlogs_dtheta(theta, u, v);
    let h = (-(theta + 1.0) * v.ln() - (1.0 / theta + 1.0) * ls).exp();
    h * (-v.ln() + ls / (theta * theta) - (1.0 / theta + 1.0) * r)
}

/// Closed-form inverse of the h-function in u:
/// u = (1 + v^-t * expm1(-t/(1+t) ln w))^(-1/t), arranged so that no
/// cancellation occurs.
pub fn hinv(theta: f64, w: f64, v: f64) -> f64 {
    let b = -theta * v.ln();
    let e = (-theta / (theta + 1.0) * w.ln()).exp_m1();
    if e <= 0.0 {
        return w.clamp(0.0, 1.0).max(1.0 - 1e-15); // w = 1 edge
    }
    let s = b + e.ln();
    // log(1 + exp(s))
    let log_inner = if s > 33.0 {
        s
    } else if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    };
    (-log_inner / theta).exp()
}
