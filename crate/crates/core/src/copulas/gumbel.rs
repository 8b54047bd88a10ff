//! Gumbel copula, theta >= 1 (theta = 1 is independence).
//!
//! With x = -ln u, y = -ln v and A = (x^t + y^t)^(1/t):
//! C(u,v) = exp(-A), h(u,v) = C y^(t-1) A^(1-t) / v,
//! c(u,v) = C (xy)^(t-1) A^(1-2t) (A + t - 1) / (uv).
//! Powers of x and y are taken through logs so extreme arguments stay finite.

struct Work {
    x: f64,
    lx: f64,
    ly: f64,
    ln_t: f64,
    a: f64,
    ln_a: f64,
}

fn work(theta: f64, u: f64, v: f64) -> Work {
    let x = -u.ln();
    let y = -v.ln();
    let (lx, ly) = (x.ln(), y.ln());
    let (p, q) = (theta * lx, theta * ly);
    let m = p.max(q);
    let ln_t = m + ((p - m).exp() + (q - m).exp()).ln();
    let ln_a = ln_t / theta;
    Work { x, lx, ly, ln_t, a: ln_a.exp(), ln_a }
}

/// Weighted mean of ln x and ln y with weights x^t, y^t; appears in dA/dt.
fn dlnt_dtheta(theta: f64, w: &Work) -> f64 {
    let (p, q) = (theta * w.lx, theta * w.ly);
    let m = p.max(q);
    let (ep, eq) = ((p - m).exp(), (q - m).exp());
    (ep * w.lx + eq * w.ly) / (ep + eq)
}

pub fn cdf(theta: f64, u: f64, v: f64) -> f64 {
    (-work(theta, u, v).a).exp()
}

pub fn hfunc(theta: f64, u: f64, v: f64) -> f64 {
    let w = work(theta, u, v);
    (-w.a + (theta - 1.0) * w.ly + (1.0 - theta) * w.ln_a - v.ln()).exp()
}

pub fn log_density(theta: f64, u: f64, v: f64) -> f64 {
    let w = work(theta, u, v);
    -w.a + (theta - 1.0) * (w.lx + w.ly) + (1.0 - 2.0 * theta) * w.ln_a
        + (w.a + theta - 1.0).ln()
        - u.ln()
        - v.ln()
}

pub fn dlogc_du(theta: f64, u: f64, v: f64) -> f64 {
    let w = work(theta, u, v);
    // dA/du = -x^(t-1) A^(1-t) / u
    let da_du = -((theta - 1.0) * w.lx + (1.0 - theta) * w.ln_a).exp() / u;
    -da_du - (theta - 1.0) / (w.x * u) - 1.0 / u + (1.0 - 2.0 * theta) * da_du / w.a
        + da_du / (w.a + theta - 1.0)
}

pub fn dlogc_dtheta(theta: f64, u: f64, v: f64) -> f64 {
    let w = work(theta, u, v);
    let wmean = dlnt_dtheta(theta, &w);
    let dlna = -w.ln_t / (theta * theta) + wmean / theta;
    let da = w.a * dlna;
    -da + (w.lx + w.ly) - 2.0 * w.ln_a + (1.0 - 2.0 * theta) * dlna
        + (da + 1.0) / (w.a + theta - 1.0)
}

pub fn dh_dtheta(theta: f64, u: f64, v: f64) -> f64 {
    let w = work(theta, u, v);
    let wmean = dlnt_dtheta(theta, &w);
    let dlna = -w.ln_t / (theta * theta) + wmean / theta;
    let da = w.a * dlna;
    let h = (-w.a + (theta - 1.0) * w.ly + (1.0 - theta) * w.ln_a - v.ln()).exp();
    h * (-da + w.ly - w.ln_a + (1.0 - theta) * dlna)
}
