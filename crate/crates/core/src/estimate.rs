//! Maximum likelihood estimation: starting values, BFGS optimisation,
//! standard errors from the per-cluster outer product of scores, and
//! AIC/BIC model selection.

use crate::data::ClusteredDataset;
use crate::error::{Error, Result};
use crate::likelihood::{per_cluster_scores, score, total_loglik, ParamVector};
use crate::margins::{MarginKind, LOG_SD_FLOOR};
use crate::model::ModelSpec;
use crate::quadrature::QuadratureRule;
use crate::special::{logistic, logit};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Estimation options.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Maximum BFGS iterations.
    pub max_iter: usize,
    /// Gradient sup-norm tolerance; None uses 1e-5 * sqrt(N).
    pub tol_grad: Option<f64>,
    /// Kendall tau anchoring the copula intercept of the automatic start.
    pub start_tau: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { max_iter: 500, tol_grad: None, start_tau: 0.5 }
    }
}

/// How the covariance estimate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovFlag {
    Ok,
    /// Sigma-hat was singular (or numerically non-PSD); a pseudo-inverse was
    /// used and standard errors are not reported.
    PseudoInverse,
}

/// Result of a maximum likelihood fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta: ParamVector,
    /// Standard errors per parameter; None when Sigma-hat is singular.
    pub se: Option<Vec<f64>>,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    /// Sup-norm of the score at the estimate.
    pub grad_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Cluster-size imbalance diagnostic sum(n_k^2)/N.
    pub lambda_k: f64,
    /// Whether any iterate produced a NaN or non-finite likelihood.
    pub nan_encountered: bool,
    pub cov_flag: CovFlag,
    pub n_obs: usize,
    pub n_clusters: usize,
}

/// Selection criterion for model comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionCriterion {
    Aic,
    Bic,
}

impl SelectionCriterion {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "aic" => Ok(SelectionCriterion::Aic),
            "bic" => Ok(SelectionCriterion::Bic),
            other => Err(Error::input(format!("unknown criterion '{other}' (expected aic or bic)"))),
        }
    }

    pub fn value(&self, fit: &FitResult) -> f64 {
        match self {
            SelectionCriterion::Aic => fit.aic,
            SelectionCriterion::Bic => fit.bic,
        }
    }
}

/// One ranked candidate from [`select`].
#[derive(Debug, Clone)]
pub struct RankedFit {
    pub label: String,
    pub spec: ModelSpec,
    pub fit: FitResult,
    pub criterion_value: f64,
    pub rank: usize,
    pub chosen: bool,
}

fn design_matrix(data: &ClusteredDataset) -> DMatrix<f64> {
    let n = data.n_obs();
    let d = data.d_margin();
    DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { data.x_margin_row(i)[j - 1] })
}

fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().cholesky().map(|ch| ch.solve(b)).or_else(|| a.clone().lu().solve(b))
}

/// Ordinary least squares for the Gaussian margin start; returns the
/// coefficients and the MLE residual log-sd (floored).
fn ols_start(data: &ClusteredDataset) -> Result<(Vec<f64>, f64)> {
    let x = design_matrix(data);
    let y = DVector::from_column_slice(data.y());
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &y;
    let beta = solve_spd(&xtx, &xty)
        .ok_or_else(|| Error::numeric("singular design matrix in OLS start"))?;
    let resid = &y - &x * &beta;
    let sigma2 = resid.norm_squared() / data.n_obs() as f64;
    let log_sd = (0.5 * sigma2.max(1e-300).ln()).max(LOG_SD_FLOOR);
    Ok((beta.iter().cloned().collect(), log_sd))
}

/// IRLS for the Poisson (log link) and Bernoulli (logit link) margins,
/// fitted as if the observations were independent.
fn irls_start(data: &ClusteredDataset, kind: MarginKind) -> Vec<f64> {
    let n = data.n_obs();
    let d = data.d_margin() + 1;
    let x = design_matrix(data);
    let ybar = data.y().iter().sum::<f64>() / n as f64;
    let fallback_intercept = match kind {
        MarginKind::Poisson => ybar.max(1e-6).ln(),
        MarginKind::Bernoulli => logit(ybar.clamp(1e-6, 1.0 - 1e-6)),
        MarginKind::Gaussian => unreachable!("handled by OLS"),
    };
    let fallback = {
        let mut b = vec![0.0; d];
        b[0] = fallback_intercept;
        b
    };
    let mut beta = DVector::from_column_slice(&fallback);
    for _ in 0..100 {
        let eta = &x * &beta;
        let mut w = DVector::zeros(n);
        let mut z = DVector::zeros(n);
        for i in 0..n {
            let (mu, wi) = match kind {
                MarginKind::Poisson => {
                    let mu = eta[i].exp();
                    (mu, mu)
                }
                MarginKind::Bernoulli => {
                    let mu = logistic(eta[i]);
                    (mu, mu * (1.0 - mu))
                }
                MarginKind::Gaussian => unreachable!(),
            };
            if !mu.is_finite() || !wi.is_finite() {
                return fallback;
            }
            w[i] = wi.max(1e-10);
            z[i] = data.y()[i] - mu;
        }
        let xtw = DMatrix::from_fn(d, n, |j, i| x[(i, j)] * w[i]);
        let xtwx = &xtw * &x;
        let xtz = x.transpose() * &z;
        let Some(delta) = solve_spd(&xtwx, &xtz) else { return fallback };
        beta += &delta;
        if !beta.iter().all(|b| b.is_finite()) || beta.amax() > 1e4 {
            return fallback;
        }
        if delta.amax() < 1e-8 {
            break;
        }
    }
    beta.iter().cloned().collect()
}

/// Automatic starting values: margin block from an independence GLM fit,
/// copula coefficients zero except the intercept, which is anchored so the
/// copula's Kendall tau equals `start_tau`.
pub fn auto_start(spec: &ModelSpec, data: &ClusteredDataset, start_tau: f64) -> Result<ParamVector> {
    if data.n_obs() == 0 {
        return Err(Error::input("no data rows"));
    }
    if data.d_margin() != spec.n_margin_covariates || data.d_copula() != spec.n_copula_covariates {
        return Err(Error::dimension("dataset covariate counts do not match the model spec"));
    }
    let mut values = Vec::with_capacity(spec.param_count());
    match spec.margin {
        MarginKind::Gaussian => {
            let (coefs, log_sd) = ols_start(data)?;
            values.extend(coefs);
            values.push(log_sd);
        }
        kind => values.extend(irls_start(data, kind)),
    }
    if spec.copula.has_parameter() {
        let param = spec.copula.tau_to_param(start_tau)?;
        values.push(spec.copula.predictor_from_param(param)?);
        values.extend(std::iter::repeat_n(0.0, spec.n_copula_covariates));
    }
    ParamVector::new(spec, values)
}

struct Objective<'a> {
    spec: &'a ModelSpec,
    data: &'a ClusteredDataset,
    rule: &'a QuadratureRule,
    template: ParamVector,
    nan_seen: std::cell::Cell<bool>,
}

impl<'a> Objective<'a> {
    /// Negative log-likelihood; +inf on domain failures or NaN.
    fn f(&self, x: &[f64]) -> f64 {
        let Ok(theta) = self.template.with_values(x.to_vec()) else {
            return f64::INFINITY;
        };
        if x.iter().any(|v| !v.is_finite()) {
            self.nan_seen.set(true);
            return f64::INFINITY;
        }
        match total_loglik(self.spec, &theta, self.data, self.rule) {
            Ok(ll) if ll.is_finite() => -ll,
            Ok(_) => {
                self.nan_seen.set(true);
                f64::INFINITY
            }
            Err(_) => {
                self.nan_seen.set(true);
                f64::INFINITY
            }
        }
    }

    /// Negative score; None when any component is not finite.
    fn grad(&self, x: &[f64]) -> Option<Vec<f64>> {
        let theta = self.template.with_values(x.to_vec()).ok()?;
        let g = score(self.spec, &theta, self.data, self.rule).ok()?;
        if g.iter().any(|v| !v.is_finite()) {
            self.nan_seen.set(true);
            return None;
        }
        Some(g.iter().map(|v| -v).collect())
    }
}

/// Maximise the log-likelihood by BFGS with a backtracking line search on the
/// unconstrained parameterisation.
pub fn fit(
    spec: &ModelSpec,
    data: &ClusteredDataset,
    rule: &QuadratureRule,
    start: Option<ParamVector>,
    options: &FitOptions,
) -> Result<FitResult> {
    let start = match start {
        Some(s) => {
            if s.len() != spec.param_count() {
                return Err(Error::dimension("starting vector length does not match the model"));
            }
            s
        }
        None => auto_start(spec, data, options.start_tau)?,
    };
    let n = data.n_obs() as f64;
    let tol_g = options.tol_grad.unwrap_or(1e-5 * n.sqrt());
    let dim = start.len();
    let obj = Objective {
        spec,
        data,
        rule,
        template: start.clone(),
        nan_seen: std::cell::Cell::new(false),
    };

    let mut x = start.values().to_vec();
    let mut fx = obj.f(&x);
    if !fx.is_finite() {
        return Err(Error::numeric("log-likelihood is not finite at the starting point"));
    }
    let mut g = obj
        .grad(&x)
        .ok_or_else(|| Error::numeric("score is not finite at the starting point"))?;
    // Inverse Hessian approximation.
    let mut h = DMatrix::<f64>::identity(dim, dim);
    let mut best_x = x.clone();
    let mut best_f = fx;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..options.max_iter {
        iterations = iter + 1;
        let gv = DVector::from_column_slice(&g);
        let mut dir = -(&h * &gv);
        let mut slope = dir.dot(&gv);
        if !(slope < 0.0) {
            // Not a descent direction; restart from steepest descent.
            h = DMatrix::identity(dim, dim);
            dir = -gv.clone();
            slope = dir.dot(&gv);
        }

        // Backtracking line search with the Armijo condition.
        let mut alpha = 1.0_f64;
        let mut accepted = None;
        for _ in 0..60 {
            let xt: Vec<f64> = x.iter().zip(dir.iter()).map(|(xi, di)| xi + alpha * di).collect();
            let ft = obj.f(&xt);
            if ft.is_finite() && ft <= fx + 1e-4 * alpha * slope {
                accepted = Some((xt, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xt, ft)) = accepted else {
            // No improvement possible along this direction.
            converged = sup_norm(&g) < tol_g;
            break;
        };
        let Some(gt) = obj.grad(&xt) else {
            // Gradient failed at the new point: keep the best iterate.
            if ft < best_f {
                best_f = ft;
                best_x = xt;
            }
            break;
        };

        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        let s_norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y_norm = yv.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy > 1e-10 * s_norm * y_norm {
            // Standard inverse BFGS update.
            let rho = 1.0 / sy;
            let sv = DVector::from_column_slice(&s);
            let yvv = DVector::from_column_slice(&yv);
            let hy = &h * &yvv;
            let yhy = yvv.dot(&hy);
            // H <- H + (sy + yHy) (s s^T)/sy^2 - (H y s^T + s y^T H)/sy
            for i in 0..dim {
                for j in 0..dim {
                    h[(i, j)] += (sy + yhy) * sv[i] * sv[j] * rho * rho
                        - (hy[i] * sv[j] + sv[i] * hy[j]) * rho;
                }
            }
        }

        let rel_step = s_norm / (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt());
        x = xt;
        fx = ft;
        g = gt;
        if fx < best_f {
            best_f = fx;
            best_x = x.clone();
        }
        if sup_norm(&g) < tol_g && rel_step < 1e-8 {
            converged = true;
            break;
        }
    }

    let theta = start.with_values(best_x)?;
    let loglik = -best_f;
    let grad_norm = match obj.grad(theta.values()) {
        Some(gr) => sup_norm(&gr),
        None => f64::NAN,
    };
    if converged && !(grad_norm < tol_g) {
        converged = false;
    }
    let p = dim as f64;
    let (se, cov_flag) = match covariance(spec, &theta, data, rule) {
        Ok(cov) => (cov.se, cov.flag),
        Err(_) => (None, CovFlag::PseudoInverse),
    };
    Ok(FitResult {
        theta,
        se,
        loglik,
        aic: -2.0 * loglik + 2.0 * p,
        bic: -2.0 * loglik + n.ln() * p,
        grad_norm,
        converged,
        iterations,
        lambda_k: data.lambda_k(),
        nan_encountered: obj.nan_seen.get(),
        cov_flag,
        n_obs: data.n_obs(),
        n_clusters: data.n_clusters(),
    })
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Covariance of the estimator from the outer product of per-cluster scores:
/// Sigma-hat = (1/N) sum_k g_k g_k^T, Var(theta) ~ Sigma-hat^-1 / N.
pub struct Covariance {
    /// Sigma-hat, the normalised outer product of per-cluster scores.
    pub sigma_hat: DMatrix<f64>,
    /// Estimated covariance of theta-hat (Sigma-hat^-1 / N, possibly via
    /// pseudo-inverse).
    pub cov: DMatrix<f64>,
    pub se: Option<Vec<f64>>,
    pub flag: CovFlag,
}

pub fn covariance(
    spec: &ModelSpec,
    theta: &ParamVector,
    data: &ClusteredDataset,
    rule: &QuadratureRule,
) -> Result<Covariance> {
    let rows = per_cluster_scores(spec, theta, data, rule)?;
    let dim = spec.param_count();
    let n = data.n_obs() as f64;
    let mut sigma = DMatrix::<f64>::zeros(dim, dim);
    for r in &rows {
        for i in 0..dim {
            for j in 0..dim {
                sigma[(i, j)] += r[i] * r[j];
            }
        }
    }
    sigma /= n;
    let eig = sigma.clone().symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let tol = 1e-10 * max_eig.max(1e-300);
    let singular = eig.eigenvalues.iter().any(|&l| l < tol);
    // Invert on the well-conditioned eigenspace.
    let mut inv_diag = eig.eigenvalues.clone();
    for l in inv_diag.iter_mut() {
        *l = if *l >= tol { 1.0 / *l } else { 0.0 };
    }
    let v = &eig.eigenvectors;
    let cov = v * DMatrix::from_diagonal(&inv_diag) * v.transpose() / n;
    let (se, flag) = if singular {
        (None, CovFlag::PseudoInverse)
    } else {
        let se: Vec<f64> = (0..dim).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
        (Some(se), CovFlag::Ok)
    };
    Ok(Covariance { sigma_hat: sigma, cov, se, flag })
}

/// Fit every candidate and rank them by the criterion (lower is better).
/// Ties break by fewer parameters, then by candidate order. Candidates that
/// fail to fit entirely are ranked last, in order, with infinite criterion.
pub fn select(
    candidates: &[(String, ModelSpec)],
    data: &ClusteredDataset,
    rule: &QuadratureRule,
    criterion: SelectionCriterion,
    options: &FitOptions,
) -> Result<Vec<RankedFit>> {
    if candidates.len() < 2 {
        return Err(Error::input("model selection needs at least two candidates"));
    }
    let mut entries: Vec<(usize, RankedFit)> = Vec::new();
    for (order, (label, spec)) in candidates.iter().enumerate() {
        let fit_res = fit(spec, data, rule, None, options);
        match fit_res {
            Ok(f) => {
                let value = criterion.value(&f);
                entries.push((
                    order,
                    RankedFit {
                        label: label.clone(),
                        spec: spec.clone(),
                        fit: f,
                        criterion_value: value,
                        rank: 0,
                        chosen: false,
                    },
                ));
            }
            Err(e) => {
                return Err(Error::numeric(format!("candidate '{label}' failed to fit: {e}")));
            }
        }
    }
    entries.sort_by(|(oa, a), (ob, b)| {
        a.criterion_value
            .partial_cmp(&b.criterion_value)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.spec.param_count().cmp(&b.spec.param_count()))
            .then(oa.cmp(ob))
    });
    let mut ranked: Vec<RankedFit> = entries.into_iter().map(|(_, r)| r).collect();
    for (i, r) in ranked.iter_mut().enumerate() {
        r.rank = i + 1;
        r.chosen = i == 0;
    }
    Ok(ranked)
}
