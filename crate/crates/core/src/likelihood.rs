//! Cluster and total log-likelihood with the latent factor integrated out by
//! quadrature, plus the analytic score.
//!
//! For cluster k the likelihood is  f_k(y_k) = int_0^1 prod_i f_i(y_ki, v) dv
//! with per-observation densities
//!   continuous: f(y, v) = g(y) c(G(y), v)
//!   discrete:   f(y, v) = h(G(y), v) - h(G(y-), v)
//! where h is the copula h-function. The integral is evaluated on a fixed
//! quadrature rule over (0,1) — by default Gauss-Legendre nodes pushed
//! through a cosine map that refines both endpoints, where one-sided
//! clusters concentrate their mass. Per-cluster products are rescaled by the
//! maximum node log-product (log-sum-exp) so large clusters cannot underflow.
//!
//! The score follows the same structure: the gradient of log f_k is the
//! likelihood-weighted average over nodes of the summed per-observation
//! derivative of log f_i(y, v), assembled from closed-form margin and copula
//! derivatives.
//!
//! total_loglik, score and per_cluster_scores evaluate clusters in parallel
//! and then reduce sequentially in cluster-index order, so results are
//! bit-stable for a fixed dataset regardless of thread scheduling.

use crate::copulas::{CopulaKind, PreparedCopula};
use crate::data::ClusteredDataset;
use crate::error::{Error, Result};
use crate::margins::{MarginLink, MarginParam};
use crate::model::ModelSpec;
use crate::quadrature::QuadratureRule;
use rayon::prelude::*;

/// Flat unconstrained parameter vector: margin coefficients (intercept
/// first), the Gaussian log-sd dispersion slot if present, then copula
/// coefficients (intercept first).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    n_margin_coefs: usize,
    has_dispersion: bool,
    n_copula_coefs: usize,
}

impl ParamVector {
    pub fn new(spec: &ModelSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.param_count() {
            return Err(Error::dimension(format!(
                "parameter vector has {} entries, model needs {}",
                values.len(),
                spec.param_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("parameter vector has non-finite entries"));
        }
        Ok(ParamVector {
            values,
            n_margin_coefs: 1 + spec.n_margin_covariates,
            has_dispersion: spec.margin.has_dispersion(),
            n_copula_coefs: spec.copula_param_count(),
        })
    }

    pub fn zeros(spec: &ModelSpec) -> Self {
        Self::new(spec, vec![0.0; spec.param_count()]).expect("zero vector always valid")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Replace the values, keeping the layout.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::dimension("parameter vector length change"));
        }
        Ok(ParamVector { values, ..self.clone() })
    }

    pub fn margin_coefficients(&self) -> &[f64] {
        &self.values[..self.n_margin_coefs]
    }

    pub fn dispersion(&self) -> Option<f64> {
        self.has_dispersion.then(|| self.values[self.n_margin_coefs])
    }

    pub fn copula_coefficients(&self) -> &[f64] {
        let start = self.n_margin_coefs + usize::from(self.has_dispersion);
        &self.values[start..]
    }

    /// Number of margin entries (coefficients plus dispersion).
    pub fn margin_block_len(&self) -> usize {
        self.n_margin_coefs + usize::from(self.has_dispersion)
    }

    pub fn margin_link(&self, spec: &ModelSpec) -> MarginLink {
        MarginLink::new(spec.margin, self.margin_coefficients().to_vec(), self.dispersion())
            .expect("layout enforced at construction")
    }

    pub fn copula_predictor(&self, x: &[f64]) -> f64 {
        let b = self.copula_coefficients();
        if b.is_empty() {
            return 0.0;
        }
        let mut s = b[0];
        for (bj, xj) in b[1..].iter().zip(x) {
            s += bj * xj;
        }
        s
    }
}

/// Per-observation quantities that do not depend on the quadrature node.
struct ObsPrep {
    copula: PreparedCopula,
    /// dparam/dpredictor for the copula link at this observation.
    dparam_ds: f64,
    body: ObsBody,
}

enum ObsBody {
    Continuous {
        log_g: f64,
        /// Coordinate of G(y) (normal/t score for elliptical families).
        u_coord: f64,
    },
    Discrete {
        /// None marks G(y) = 1 exactly (upper tail handled as the limit).
        hi_coord: Option<f64>,
        /// None marks G(y-) = 0 exactly (support minimum).
        lo_coord: Option<f64>,
    },
}

/// Per-observation derivative pieces (only built when the score is needed).
struct ObsGrad {
    /// d log g / d(margin entry), continuous margins.
    dlogg: Vec<f64>,
    /// dG(y)/d(margin entry); for discrete margins this is the upper value.
    du_hi: Vec<f64>,
    /// dG(y-)/d(margin entry), discrete margins only.
    du_lo: Vec<f64>,
    /// Copula-covariate row scaled into predictor space (intercept first).
    copula_row: Vec<f64>,
}

/// Shared evaluation state for one (spec, theta, rule) triple.
pub(crate) struct Evaluator<'a> {
    data: &'a ClusteredDataset,
    rule: &'a QuadratureRule,
    obs: Vec<ObsPrep>,
    grads: Option<Vec<ObsGrad>>,
    /// Quadrature nodes transformed to the copula's internal coordinate.
    v_coords: Vec<f64>,
    n_params: usize,
}

fn margin_entry_count(spec: &ModelSpec) -> usize {
    spec.margin_param_count()
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(
        spec: &'a ModelSpec,
        theta: &ParamVector,
        data: &'a ClusteredDataset,
        rule: &'a QuadratureRule,
        with_grads: bool,
    ) -> Result<Self> {
        let margin_link = theta.margin_link(spec);
        let n_margin_entries = margin_entry_count(spec);
        let n_params = spec.param_count();
        let mut obs = Vec::with_capacity(data.n_obs());
        let mut grads = with_grads.then(|| Vec::with_capacity(data.n_obs()));
        for i in 0..data.n_obs() {
            let y = data.y()[i];
            let xm = data.x_margin_row(i);
            let xc = data.x_copula_row(i);
            let mp = margin_link.param_at(xm).map_err(|e| e.at_observation(i))?;
            let s = theta.copula_predictor(xc);
            let param = spec.copula.param_from_predictor(s).map_err(|e| e.at_observation(i))?;
            if !spec.copula.param_valid(param) {
                return Err(Error::domain(format!(
                    "observation {i}: copula parameter {param} out of range"
                )));
            }
            let prep = spec.copula.prepare(param);
            let body = if spec.margin.is_discrete() {
                let u_hi = mp.cdf(y);
                let u_lo = mp.cdf_left(y);
                ObsBody::Discrete {
                    hi_coord: (u_hi < 1.0).then(|| prep.u_coord(u_hi)),
                    lo_coord: (u_lo > 0.0).then(|| prep.u_coord(u_lo)),
                }
            } else {
                ObsBody::Continuous { log_g: mp.log_pdf(y), u_coord: prep.u_coord(mp.cdf(y)) }
            };
            if let Some(g) = grads.as_mut() {
                g.push(Self::obs_grad(spec, &mp, y, xm, xc, n_margin_entries));
            }
            obs.push(ObsPrep {
                copula: prep,
                dparam_ds: spec.copula.dparam_dpredictor(param),
                body,
            });
        }
        // Node coordinates depend on the copula kind, not on the parameter.
        let probe = spec.copula.prepare(match spec.copula.kind() {
            CopulaKind::Gaussian | CopulaKind::Student => 0.0,
            CopulaKind::Clayton => 1.0,
            CopulaKind::Gumbel => 1.5,
            _ => 0.0,
        });
        let v_coords = rule.nodes().iter().map(|&v| probe.u_coord(v)).collect();
        Ok(Evaluator { data, rule, obs, grads, v_coords, n_params })
    }

    fn obs_grad(
        spec: &ModelSpec,
        mp: &MarginParam,
        y: f64,
        xm: &[f64],
        xc: &[f64],
        n_margin_entries: usize,
    ) -> ObsGrad {
        let chain = mp.dparam_dpredictor();
        let mut dlogg = vec![0.0; n_margin_entries];
        let mut du_hi = vec![0.0; n_margin_entries];
        let mut du_lo = vec![0.0; n_margin_entries];
        let n_coefs = 1 + spec.n_margin_covariates;
        let dldp = mp.dlogpdf_dparam(y);
        let dcdp = mp.dcdf_dparam(y);
        let dcdp_left = mp.dcdf_left_dparam(y);
        for j in 0..n_coefs {
            let xj = if j == 0 { 1.0 } else { xm[j - 1] };
            dlogg[j] = dldp * chain * xj;
            du_hi[j] = dcdp * chain * xj;
            du_lo[j] = dcdp_left * chain * xj;
        }
        if spec.margin.has_dispersion() {
            dlogg[n_coefs] = mp.dlogpdf_dlogsd(y);
            du_hi[n_coefs] = mp.dcdf_dlogsd(y);
            du_lo[n_coefs] = du_hi[n_coefs];
        }
        let copula_row = if spec.copula_param_count() > 0 {
            let mut row = Vec::with_capacity(1 + xc.len());
            row.push(1.0);
            row.extend_from_slice(xc);
            row
        } else {
            Vec::new()
        };
        ObsGrad { dlogg, du_hi, du_lo, copula_row }
    }

    /// log f_i(y_i, v_q) for observation i at node q.
    fn obs_log_density(&self, i: usize, q: usize) -> f64 {
        self.obs_log_density_at(i, self.v_coords[q])
    }

    /// log f_i at an arbitrary (pre-transformed) latent coordinate.
    fn obs_log_density_at(&self, i: usize, vc: f64) -> f64 {
        let o = &self.obs[i];
        match &o.body {
            ObsBody::Continuous { log_g, u_coord } => {
                log_g + o.copula.log_density_c(*u_coord, vc)
            }
            ObsBody::Discrete { hi_coord, lo_coord } => {
                let hi = hi_coord.map_or(1.0, |u| o.copula.hfunc_c(u, vc));
                let lo = lo_coord.map_or(0.0, |u| o.copula.hfunc_c(u, vc));
                (hi - lo).max(0.0).ln()
            }
        }
    }

    /// Latent coordinate transform for values off the rule's grid.
    pub(crate) fn v_coord_at(&self, v: f64) -> f64 {
        self.obs[0].copula.v_coord(v)
    }

    /// sum_i log f_i(y_i, v) over cluster k at an arbitrary latent value.
    pub(crate) fn cluster_logproduct_at(&self, k: usize, v: f64) -> f64 {
        let vc = self.v_coord_at(v);
        self.data.cluster_range(k).map(|i| self.obs_log_density_at(i, vc)).sum()
    }

    /// Gradient of log f_i(y_i, v_q) with respect to theta, accumulated into
    /// `out` (which has one slot per parameter).
    fn accumulate_obs_grad(&self, i: usize, q: usize, out: &mut [f64]) {
        let o = &self.obs[i];
        let g = &self.grads.as_ref().expect("built with gradients")[i];
        let vq = self.v_coords[q];
        let n_m = g.dlogg.len();
        match &o.body {
            ObsBody::Continuous { u_coord, .. } => {
                let dlc_du = o.copula.dlogc_du_c(*u_coord, vq);
                for ((slot, dlogg), du) in out.iter_mut().zip(&g.dlogg).zip(&g.du_hi) {
                    *slot += dlogg + dlc_du * du;
                }
                if !g.copula_row.is_empty() {
                    let dlc_dp = o.copula.dlogc_dparam_c(*u_coord, vq) * o.dparam_ds;
                    for (j, xj) in g.copula_row.iter().enumerate() {
                        out[n_m + j] += dlc_dp * xj;
                    }
                }
            }
            ObsBody::Discrete { hi_coord, lo_coord } => {
                let hi = hi_coord.map_or(1.0, |u| o.copula.hfunc_c(u, vq));
                let lo = lo_coord.map_or(0.0, |u| o.copula.hfunc_c(u, vq));
                let f = (hi - lo).max(1e-300);
                let c_hi = hi_coord.map_or(0.0, |u| o.copula.density_c(u, vq));
                let c_lo = lo_coord.map_or(0.0, |u| o.copula.density_c(u, vq));
                for ((slot, du_hi), du_lo) in out.iter_mut().zip(&g.du_hi).zip(&g.du_lo) {
                    *slot += (c_hi * du_hi - c_lo * du_lo) / f;
                }
                if !g.copula_row.is_empty() {
                    let dh_hi = hi_coord.map_or(0.0, |u| o.copula.dh_dparam_c(u, vq));
                    let dh_lo = lo_coord.map_or(0.0, |u| o.copula.dh_dparam_c(u, vq));
                    let dp = (dh_hi - dh_lo) * o.dparam_ds / f;
                    for (j, xj) in g.copula_row.iter().enumerate() {
                        out[n_m + j] += dp * xj;
                    }
                }
            }
        }
    }

    /// Per-node log-products sum_i log f_i(v_q) for one cluster.
    pub(crate) fn cluster_node_logproducts(&self, k: usize) -> Vec<f64> {
        let range = self.data.cluster_range(k);
        (0..self.rule.len())
            .map(|q| range.clone().map(|i| self.obs_log_density(i, q)).sum())
            .collect()
    }

    /// log f_k via log-sum-exp over the quadrature rule.
    pub(crate) fn cluster_loglik(&self, k: usize) -> f64 {
        let logs = self.cluster_node_logproducts(k);
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return f64::NEG_INFINITY;
        }
        let t: f64 = logs
            .iter()
            .zip(self.rule.weights())
            .map(|(&l, &w)| w * (l - m).exp())
            .sum();
        t.ln() + m
    }

    /// Gradient of log f_k; returns None when the cluster underflowed.
    fn cluster_score(&self, k: usize) -> Option<Vec<f64>> {
        let logs = self.cluster_node_logproducts(k);
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return None;
        }
        let range = self.data.cluster_range(k);
        let mut acc = vec![0.0; self.n_params];
        let mut node_grad = vec![0.0; self.n_params];
        let mut total_w = 0.0;
        for (q, (&lq, &wq)) in logs.iter().zip(self.rule.weights()).enumerate() {
            let w = wq * (lq - m).exp();
            if w == 0.0 {
                continue;
            }
            node_grad.iter_mut().for_each(|g| *g = 0.0);
            for i in range.clone() {
                self.accumulate_obs_grad(i, q, &mut node_grad);
            }
            for (a, g) in acc.iter_mut().zip(&node_grad) {
                *a += w * g;
            }
            total_w += w;
        }
        for a in acc.iter_mut() {
            *a /= total_w;
        }
        Some(acc)
    }
}

/// Per-observation density f(y, v) with respect to the margin's reference
/// measure, for a fixed latent value v.
pub fn obs_density(
    spec: &ModelSpec,
    theta: &ParamVector,
    y: f64,
    x_margin: &[f64],
    x_copula: &[f64],
    v: f64,
) -> Result<f64> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::domain(format!("latent value v = {v} outside (0,1)")));
    }
    let mp = theta.margin_link(spec).param_at(x_margin)?;
    let s = theta.copula_predictor(x_copula);
    let param = spec.copula.param_from_predictor(s)?;
    let prep = spec.copula.prepare(param);
    let vc = prep.v_coord(v);
    if spec.margin.is_discrete() {
        let u_hi = mp.cdf(y);
        let u_lo = mp.cdf_left(y);
        let hi = if u_hi >= 1.0 { 1.0 } else { prep.hfunc_c(prep.u_coord(u_hi), vc) };
        let lo = if u_lo <= 0.0 { 0.0 } else { prep.hfunc_c(prep.u_coord(u_lo), vc) };
        Ok((hi - lo).max(0.0))
    } else {
        let u = prep.u_coord(mp.cdf(y));
        Ok((mp.log_pdf(y) + prep.log_density_c(u, vc)).exp())
    }
}

/// Log-likelihood contribution of cluster `k`.
///
/// Returns negative infinity (not an error) when every quadrature node
/// underflows; callers treat that as a diagnostic.
pub fn cluster_loglik(
    spec: &ModelSpec,
    theta: &ParamVector,
    data: &ClusteredDataset,
    k: usize,
    rule: &QuadratureRule,
) -> Result<f64> {
    let eval = Evaluator::new(spec, theta, data, rule, false)?;
    Ok(eval.cluster_loglik(k))
}

/// Total log-likelihood: the sum of cluster contributions.
pub fn total_loglik(
    spec: &ModelSpec,
    theta: &ParamVector,
    data: &ClusteredDataset,
    rule: &QuadratureRule,
) -> Result<f64> {
    let eval = Evaluator::new(spec, theta, data, rule, false)?;
    let per: Vec<f64> =
        (0..data.n_clusters()).into_par_iter().map(|k| eval.cluster_loglik(k)).collect();
    Ok(per.iter().sum())
}

/// Score vector: gradient of the total log-likelihood in the unconstrained
/// parameterisation.
pub fn score(
    spec: &ModelSpec,
    theta: &ParamVector,
    data: &ClusteredDataset,
    rule: &QuadratureRule,
) -> Result<Vec<f64>> {
    let rows = per_cluster_scores(spec, theta, data, rule)?;
    let mut total = vec![0.0; spec.param_count()];
    for row in &rows {
        for (t, r) in total.iter_mut().zip(row) {
            *t += r;
        }
    }
    Ok(total)
}

/// K x dim(theta) matrix of per-cluster score vectors; rows sum to the score
/// and feed the covariance estimator. A cluster that underflows contributes a
/// zero row (and is flagged by the fit via its -inf log-likelihood).
pub fn per_cluster_scores(
    spec: &ModelSpec,
    theta: &ParamVector,
    data: &ClusteredDataset,
    rule: &QuadratureRule,
) -> Result<Vec<Vec<f64>>> {
    let eval = Evaluator::new(spec, theta, data, rule, true)?;
    let rows: Vec<Vec<f64>> = (0..data.n_clusters())
        .into_par_iter()
        .map(|k| eval.cluster_score(k).unwrap_or_else(|| vec![0.0; eval.n_params]))
        .collect();
    Ok(rows)
}
