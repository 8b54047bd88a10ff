//! Posterior inference on the latent cluster factor and conditional
//! prediction of new responses.

use crate::data::ClusteredDataset;
use crate::error::{Error, Result};
use crate::likelihood::{Evaluator, ParamVector};
use crate::margins::{MarginKind, MarginParam};
use crate::model::ModelSpec;
use crate::quadrature::{integrate_interval, QuadratureRule};
use crate::special::logit;
use rayon::prelude::*;

/// Posterior summary of the latent factor of one cluster.
#[derive(Debug, Clone)]
pub struct LatentEstimate {
    pub cluster: usize,
    pub label: String,
    /// Posterior density evaluated at the quadrature nodes.
    pub density: Vec<f64>,
    /// Posterior mean of V_k.
    pub mean: f64,
    /// Posterior median of V_k (the default point estimator).
    pub median: f64,
    /// Set when the cluster likelihood underflowed and a uniform posterior
    /// was substituted.
    pub degenerate: bool,
}

/// Posterior density of V_k on the rule's grid, normalised so the weighted
/// node sum is one; the median interpolates the piecewise-linear grid cdf.
pub fn latent_posterior(
    spec: &ModelSpec,
    theta: &ParamVector,
    data: &ClusteredDataset,
    k: usize,
    rule: &QuadratureRule,
) -> Result<LatentEstimate> {
    let eval = Evaluator::new(spec, theta, data, rule, false)?;
    Ok(latent_from_eval(&eval, data, k, rule))
}

/// Posterior summaries for every cluster (parallel over clusters).
pub fn latent_posteriors(
    spec: &ModelSpec,
    theta: &ParamVector,
    data: &ClusteredDataset,
    rule: &QuadratureRule,
) -> Result<Vec<LatentEstimate>> {
    let eval = Evaluator::new(spec, theta, data, rule, false)?;
    Ok((0..data.n_clusters())
        .into_par_iter()
        .map(|k| latent_from_eval(&eval, data, k, rule))
        .collect())
}

fn latent_from_eval(
    eval: &Evaluator,
    data: &ClusteredDataset,
    k: usize,
    rule: &QuadratureRule,
) -> LatentEstimate {
    let logs = eval.cluster_node_logproducts(k);
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let label = data.cluster_label(k).to_string();
    if !m.is_finite() {
        return LatentEstimate {
            cluster: k,
            label,
            density: vec![1.0; rule.len()],
            mean: 0.5,
            median: 0.5,
            degenerate: true,
        };
    }
    let total: f64 =
        logs.iter().zip(rule.weights()).map(|(&l, &w)| w * (l - m).exp()).sum();
    let density: Vec<f64> = logs.iter().map(|&l| (l - m).exp() / total).collect();
    let mean: f64 = rule
        .nodes()
        .iter()
        .zip(rule.weights())
        .zip(&density)
        .map(|((&v, &w), &d)| w * v * d)
        .sum();
    let median = grid_median(eval, k, m, rule);
    LatentEstimate { cluster: k, label, density, mean, median, degenerate: false }
}

/// Posterior median of V_k: the grid cdf is accumulated by integrating the
/// (rescaled) posterior density over the inter-node panels, then the median
/// is bisected inside its bracketing panel. Monotone by construction and
/// continuous in the data; the grid alone would leave an O(node-spacing^2)
/// bias that the downstream predictions cannot afford.
fn grid_median(eval: &Evaluator, k: usize, log_scale: f64, rule: &QuadratureRule) -> f64 {
    let dens = |v: f64| (eval.cluster_logproduct_at(k, v) - log_scale).exp();
    let panel = |a: f64, b: f64| crate::quadrature::integrate_interval(dens, a, b, 8);
    // panel boundaries: 0, nodes..., 1
    let mut bounds = Vec::with_capacity(rule.len() + 2);
    bounds.push(0.0);
    bounds.extend_from_slice(rule.nodes());
    bounds.push(1.0);
    let masses: Vec<f64> = bounds.windows(2).map(|w| panel(w[0], w[1])).collect();
    let total: f64 = masses.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return 0.5;
    }
    let target = 0.5 * total;
    let mut cum = 0.0;
    for (i, &mass) in masses.iter().enumerate() {
        if cum + mass >= target {
            let (mut lo, mut hi) = (bounds[i], bounds[i + 1]);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if cum + panel(bounds[i], mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-12 {
                    break;
                }
            }
            return (0.5 * (lo + hi)).clamp(0.0, 1.0);
        }
        cum += mass;
    }
    1.0
}

fn links_at(
    spec: &ModelSpec,
    theta: &ParamVector,
    x_margin: &[f64],
    x_copula: &[f64],
) -> Result<(MarginParam, f64)> {
    let mp = theta.margin_link(spec).param_at(x_margin)?;
    let param = spec.copula.param_from_predictor(theta.copula_predictor(x_copula))?;
    Ok((mp, param))
}

/// Conditional cdf of the response given covariates and the latent value:
/// F(y | x, v) = h(G(y), v).
pub fn cond_cdf(
    spec: &ModelSpec,
    theta: &ParamVector,
    y: f64,
    x_margin: &[f64],
    x_copula: &[f64],
    v: f64,
) -> Result<f64> {
    let (mp, param) = links_at(spec, theta, x_margin, x_copula)?;
    let u = mp.cdf(y);
    if u <= 0.0 {
        return Ok(0.0);
    }
    if u >= 1.0 {
        return Ok(1.0);
    }
    spec.copula.hfunc(param, u, v)
}

/// Conditional quantile: Q(u | x, v) = G^-1(hinv(u, v)).
pub fn cond_quantile(
    spec: &ModelSpec,
    theta: &ParamVector,
    u: f64,
    x_margin: &[f64],
    x_copula: &[f64],
    v: f64,
) -> Result<f64> {
    let (mp, param) = links_at(spec, theta, x_margin, x_copula)?;
    let w = spec.copula.hinv(param, u, v)?;
    mp.quantile(w.clamp(1e-12, 1.0 - 1e-12))
}

/// Panel boundaries for the quantile integral, refined toward 0 and 1 where
/// the integrand of continuous margins is steep.
const U_PANELS: [f64; 9] = [0.0, 1e-6, 1e-4, 1e-2, 0.5, 1.0 - 1e-2, 1.0 - 1e-4, 1.0 - 1e-6, 1.0];

/// Conditional expectation E(Y | x, v).
///
/// Continuous margins integrate the conditional quantile over u with
/// composite 64-node Gauss-Legendre panels; counting margins sum
/// y * (F(y|v) - F(y-|v)) over the support truncated at cdf >= 1 - 1e-10.
pub fn cond_mean(
    spec: &ModelSpec,
    theta: &ParamVector,
    x_margin: &[f64],
    x_copula: &[f64],
    v: f64,
) -> Result<f64> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::domain(format!("latent value v = {v} outside (0,1)")));
    }
    let (mp, param) = links_at(spec, theta, x_margin, x_copula)?;
    match mp.kind() {
        MarginKind::Gaussian => {
            let mut acc = 0.0;
            for pair in U_PANELS.windows(2) {
                acc += integrate_interval(
                    |u| {
                        let w = spec
                            .copula
                            .hinv(param, u.clamp(1e-15, 1.0 - 1e-15), v)
                            .unwrap_or(u);
                        mp.quantile(w.clamp(1e-15, 1.0 - 1e-15)).unwrap_or(0.0)
                    },
                    pair[0],
                    pair[1],
                    64,
                );
            }
            Ok(acc)
        }
        MarginKind::Bernoulli => {
            // E(Y) = 1 - F(0 | v)
            Ok(1.0 - cond_cdf(spec, theta, 0.0, x_margin, x_copula, v)?)
        }
        MarginKind::Poisson => {
            let mut acc = 0.0;
            let mut y = 0.0;
            let mut f_prev = 0.0;
            loop {
                let f_y = cond_cdf(spec, theta, y, x_margin, x_copula, v)?;
                acc += y * (f_y - f_prev).max(0.0);
                if mp.cdf(y) >= 1.0 - 1e-10 {
                    break;
                }
                if y > 1e6 {
                    return Err(Error::numeric(
                        "support truncation failed in conditional mean",
                    ));
                }
                f_prev = f_y;
                y += 1.0;
            }
            Ok(acc)
        }
    }
}

/// Location-scale route for the conditional mean of the Gaussian margin:
/// E(Y | x, v) = mu + sigma * kappa(v) with
/// kappa = int_0^inf [1 - h(G0(z), v)] dz - int_-inf^0 h(G0(z), v) dz.
pub fn cond_mean_location_scale(
    spec: &ModelSpec,
    theta: &ParamVector,
    x_margin: &[f64],
    x_copula: &[f64],
    v: f64,
) -> Result<f64> {
    let (mp, param) = links_at(spec, theta, x_margin, x_copula)?;
    let MarginParam::Gaussian { mean, sd } = mp else {
        return Err(Error::input("location-scale conditional mean requires the Gaussian margin"));
    };
    let h = |z: f64| {
        let u = crate::special::norm_cdf(z).clamp(1e-15, 1.0 - 1e-15);
        spec.copula.hfunc(param, u, v).unwrap_or(u)
    };
    let upper = integrate_interval(|z| 1.0 - h(z), 0.0, 12.0, 96);
    let lower = integrate_interval(h, -12.0, 0.0, 96);
    Ok(mean + sd * (upper - lower))
}

/// One point of a link-prediction curve.
#[derive(Debug, Clone)]
pub struct CurvePoint {
    pub x: f64,
    pub v: f64,
    /// logit P(Y = 1 | x, v)
    pub curve: f64,
}

/// Link-prediction curves for a Bernoulli margin:
/// logit P(Y=1 | x, v) = log[(1 - h(1-p(x), v)) / h(1-p(x), v)]
/// evaluated on a grid of scalar margin covariate values for each latent
/// value in `v_list`. The copula covariates are held at zero.
pub fn link_curve(
    spec: &ModelSpec,
    theta: &ParamVector,
    x_grid: &[f64],
    v_list: &[f64],
) -> Result<Vec<CurvePoint>> {
    if spec.margin != MarginKind::Bernoulli {
        return Err(Error::input("link curves require the Bernoulli margin"));
    }
    if spec.n_margin_covariates != 1 {
        return Err(Error::input("link curves expect exactly one margin covariate"));
    }
    let zeros = vec![0.0; spec.n_copula_covariates];
    let mut out = Vec::with_capacity(x_grid.len() * v_list.len());
    for &v in v_list {
        for &x in x_grid {
            let p1 = 1.0 - cond_cdf(spec, theta, 0.0, &[x], &zeros, v)?;
            out.push(CurvePoint { x, v, curve: logit(p1.clamp(1e-14, 1.0 - 1e-14)) });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
