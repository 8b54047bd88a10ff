//! Exact sampling from the factor copula model, the experiment catalog used
//! by the numerical studies, B-spline link bases, and reproducible
//! Monte-Carlo replication harnesses.

use crate::copulas::CopulaFamily;
use crate::data::{ClusteredDataset, ObsRow};
use crate::error::{Error, Result};
use crate::estimate::{fit, FitOptions, FitResult, SelectionCriterion};
use crate::likelihood::ParamVector;
use crate::margins::MarginKind;
use crate::model::ModelSpec;
use crate::predict::{cond_mean, latent_posteriors};
use crate::quadrature::QuadratureRule;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Sample one cluster: V ~ U(0,1), then per observation W ~ U(0,1),
/// U = hinv(W, V), Y = G^-1(U). Conditionally on V the responses are
/// independent.
pub fn sample_cluster<R: Rng>(
    spec: &ModelSpec,
    theta: &ParamVector,
    x_margin_rows: &[Vec<f64>],
    x_copula_rows: &[Vec<f64>],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let v = rng.gen_range(1e-12..1.0 - 1e-12);
    sample_cluster_given_v(spec, theta, x_margin_rows, x_copula_rows, v, rng)
}

/// Sample one cluster conditionally on its latent value.
pub fn sample_cluster_given_v<R: Rng>(
    spec: &ModelSpec,
    theta: &ParamVector,
    x_margin_rows: &[Vec<f64>],
    x_copula_rows: &[Vec<f64>],
    v: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let link = theta.margin_link(spec);
    let mut y = Vec::with_capacity(x_margin_rows.len());
    for (xm, xc) in x_margin_rows.iter().zip(x_copula_rows) {
        let param = spec.copula.param_from_predictor(theta.copula_predictor(xc))?;
        let w = rng.gen_range(1e-12..1.0 - 1e-12);
        let u = spec.copula.hinv(param, w, v)?;
        y.push(link.param_at(xm)?.quantile(u.clamp(1e-12, 1.0 - 1e-12))?);
    }
    Ok(y)
}

// ---------------------------------------------------------------------------
// B-spline bases for the nonlinear link designs
// ---------------------------------------------------------------------------

/// B-spline basis on the unit interval with clamped end knots.
#[derive(Debug, Clone)]
pub struct SplineBasis {
    pub degree: usize,
    pub interior_knots: Vec<f64>,
}

impl SplineBasis {
    pub fn new(degree: usize, interior_knots: Vec<f64>) -> Self {
        SplineBasis { degree, interior_knots }
    }

    /// Basis dimension (number of basis functions).
    pub fn dim(&self) -> usize {
        self.degree + self.interior_knots.len() + 1
    }

    fn knot_vector(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.degree + 1];
        t.extend_from_slice(&self.interior_knots);
        t.extend(std::iter::repeat_n(1.0, self.degree + 1));
        t
    }
}

/// Evaluate the full B-spline basis at x by the Cox-de Boor recursion.
/// The components form a partition of unity on the unit interval.
pub fn bspline_basis(basis: &SplineBasis, x: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("spline argument {x} outside [0,1]")));
    }
    let t = basis.knot_vector();
    let n = basis.dim();
    let p = basis.degree;
    // degree-0 indicators, closing the last interval at x = 1
    let mut b = vec![0.0; t.len() - 1];
    for (i, slot) in b.iter_mut().enumerate() {
        let closes = t[i + 1] >= 1.0;
        if (t[i] <= x && x < t[i + 1]) || (closes && x == 1.0 && t[i] < t[i + 1]) {
            *slot = 1.0;
        }
    }
    for d in 1..=p {
        for i in 0..t.len() - 1 - d {
            let left = if t[i + d] > t[i] { (x - t[i]) / (t[i + d] - t[i]) * b[i] } else { 0.0 };
            let right = if t[i + d + 1] > t[i + 1] {
                (t[i + d + 1] - x) / (t[i + d + 1] - t[i + 1]) * b[i + 1]
            } else {
                0.0
            };
            b[i] = left + right;
        }
    }
    b.truncate(n);
    Ok(b)
}

/// Design columns for the spline links: the full basis with the last
/// function dropped, so the model intercept absorbs the partition of unity.
pub fn spline_design_columns(basis: &SplineBasis, x: f64) -> Result<Vec<f64>> {
    let mut b = bspline_basis(basis, x)?;
    b.truncate(basis.dim() - 1);
    Ok(b)
}

// ---------------------------------------------------------------------------
// Data-generating processes
// ---------------------------------------------------------------------------

/// The experiment and DGP catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DgpId {
    /// Estimator-precision experiments 1-8.
    Exp(u8),
    /// Model-comparison DGPs 1-12.
    Dgp(u8),
}

impl DgpId {
    pub fn parse(name: &str) -> Result<Self> {
        let lower = name.to_ascii_lowercase();
        if let Some(n) = lower.strip_prefix("exp") {
            let k: u8 = n.parse().map_err(|_| Error::input(format!("unknown DGP '{name}'")))?;
            if (1..=8).contains(&k) {
                return Ok(DgpId::Exp(k));
            }
        }
        if let Some(n) = lower.strip_prefix("dgp") {
            let k: u8 = n.parse().map_err(|_| Error::input(format!("unknown DGP '{name}'")))?;
            if (1..=12).contains(&k) {
                return Ok(DgpId::Dgp(k));
            }
        }
        Err(Error::input(format!("unknown DGP '{name}' (expected exp1..exp8 or dgp1..dgp12)")))
    }

    pub fn name(&self) -> String {
        match self {
            DgpId::Exp(k) => format!("exp{k}"),
            DgpId::Dgp(k) => format!("dgp{k}"),
        }
    }

    /// Cluster size the catalog entry was designed around.
    pub fn default_cluster_size(&self) -> usize {
        match self {
            DgpId::Exp(_) => 5,
            DgpId::Dgp(_) => 30,
        }
    }
}

/// A fully specified simulation: identifier plus dimensions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DgpSpec {
    pub id: DgpId,
    pub n_clusters: usize,
    pub cluster_size: usize,
}

impl DgpSpec {
    pub fn new(id: DgpId, n_clusters: usize, cluster_size: usize) -> Self {
        DgpSpec { id, n_clusters, cluster_size }
    }
}

/// Covariate column generators used by the catalog.
#[derive(Debug, Clone, Copy)]
enum ColGen {
    Uniform01,
    UniformSym1,
    Exponential1,
    StdNormal,
}

impl ColGen {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            ColGen::Uniform01 => rng.gen_range(0.0..1.0),
            ColGen::UniformSym1 => rng.gen_range(-1.0..1.0),
            ColGen::Exponential1 => {
                let x: f64 = Exp1.sample(rng);
                x
            }
            ColGen::StdNormal => {
                let x: f64 = StandardNormal.sample(rng);
                x
            }
        }
    }
}

/// How the margin design derives from the raw draws.
#[derive(Debug, Clone)]
enum MarginDesign {
    /// Columns are the raw draws themselves.
    Columns(Vec<(&'static str, ColGen)>),
    /// One U(0,1) draw expanded as the degree-1 spline basis with a knot at
    /// one half (columns sp31, sp32).
    Spline31,
}

struct ResolvedDgp {
    spec: ModelSpec,
    true_theta: Vec<f64>,
    margin_design: MarginDesign,
    copula_cols: Vec<(&'static str, ColGen)>,
    /// (sd_eta, sd_eps): generate through the mixed-model form
    /// y = mu(x) + eta + eps, recording V = Phi(eta / sd_eta).
    mixed_gaussian: Option<(f64, f64)>,
}

impl ResolvedDgp {
    fn margin_names(&self) -> Vec<String> {
        match &self.margin_design {
            MarginDesign::Columns(cols) => cols.iter().map(|(n, _)| n.to_string()).collect(),
            MarginDesign::Spline31 => vec!["sp31".into(), "sp32".into()],
        }
    }

    fn draw_margin_row<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match &self.margin_design {
            MarginDesign::Columns(cols) => cols.iter().map(|(_, g)| g.draw(rng)).collect(),
            MarginDesign::Spline31 => {
                let x = rng.gen_range(0.0..1.0);
                spline_design_columns(&SplineBasis::new(1, vec![0.5]), x).expect("x in [0,1]")
            }
        }
    }

    fn draw_copula_row<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.copula_cols.iter().map(|(_, g)| g.draw(rng)).collect()
    }
}

/// Resolve a catalog identifier into a model, true parameters and covariate
/// generators. For DGP9-DGP12 the link coefficients (and the DGP10 margin
/// standard deviation) are redrawn from their stated distributions on
/// every call, so each replication carries its own truth.
fn resolve<R: Rng>(id: DgpId, rng: &mut R) -> Result<ResolvedDgp> {
    use ColGen::*;
    use MarginDesign::*;
    let frank = CopulaFamily::frank();
    let res = match id {
        DgpId::Exp(1) => ResolvedDgp {
            spec: ModelSpec::new(CopulaFamily::clayton(), MarginKind::Gaussian, 0, 0),
            true_theta: vec![10.0, 0.0, 0.0],
            margin_design: Columns(vec![]),
            copula_cols: vec![],
            mixed_gaussian: None,
        },
        DgpId::Exp(2) => ResolvedDgp {
            spec: ModelSpec::new(CopulaFamily::clayton(), MarginKind::Gaussian, 0, 1),
            true_theta: vec![10.0, 0.0, 1.0, -1.5],
            margin_design: Columns(vec![]),
            copula_cols: vec![("u", Uniform01)],
            mixed_gaussian: None,
        },
        DgpId::Exp(3) => ResolvedDgp {
            spec: ModelSpec::new(CopulaFamily::gumbel(), MarginKind::Gaussian, 1, 1),
            true_theta: vec![5.0, 5.0, 0.0, 1.0, -1.5],
            margin_design: Columns(vec![("z", Exponential1)]),
            copula_cols: vec![("u", Uniform01)],
            mixed_gaussian: None,
        },
        DgpId::Exp(4) => ResolvedDgp {
            spec: ModelSpec::new(CopulaFamily::clayton(), MarginKind::Poisson, 1, 1),
            true_theta: vec![2.0, -3.0, 1.0, -1.5],
            margin_design: Columns(vec![("z", Exponential1)]),
            copula_cols: vec![("u", Uniform01)],
            mixed_gaussian: None,
        },
        DgpId::Exp(5) => ResolvedDgp {
            spec: ModelSpec::new(CopulaFamily::clayton(), MarginKind::Bernoulli, 1, 1),
            true_theta: vec![2.0, -3.0, 1.0, -1.5],
            margin_design: Columns(vec![("z", Exponential1)]),
            copula_cols: vec![("u", Uniform01)],
            mixed_gaussian: None,
        },
        DgpId::Exp(6) => ResolvedDgp {
            spec: ModelSpec::new(frank, MarginKind::Gaussian, 2, 2),
            true_theta: vec![5.0, 5.0, 3.0, 0.0, 2.0, 8.0, 3.0],
            margin_design: Columns(vec![("z3", StdNormal), ("u4", UniformSym1)]),
            copula_cols: vec![("z1", StdNormal), ("u2", UniformSym1)],
            mixed_gaussian: None,
        },
        DgpId::Exp(7) => ResolvedDgp {
            spec: ModelSpec::new(frank, MarginKind::Poisson, 2, 2),
            true_theta: vec![3.0, -1.0, -0.5, 2.0, 8.0, 3.0],
            margin_design: Columns(vec![("u3", Uniform01), ("u4", UniformSym1)]),
            copula_cols: vec![("u1", Uniform01), ("u2", UniformSym1)],
            mixed_gaussian: None,
        },
        DgpId::Exp(8) => ResolvedDgp {
            spec: ModelSpec::new(frank, MarginKind::Bernoulli, 2, 2),
            true_theta: vec![1.5, -2.0, -0.5, 2.0, 8.0, 3.0],
            margin_design: Columns(vec![("u3", Uniform01), ("u4", Uniform01)]),
            copula_cols: vec![("u1", Uniform01), ("u2", UniformSym1)],
            mixed_gaussian: None,
        },
        DgpId::Dgp(k @ (1 | 2)) => {
            // y = eta + s(x) + eps, eta ~ N(0,1), eps ~ N(0, 1.5^2);
            // equivalently a Gaussian copula with rho = sd_eta / sd_total.
            let (sd_eta, sd_eps) = (1.0_f64, 1.5_f64);
            let sd = (sd_eta * sd_eta + sd_eps * sd_eps).sqrt();
            let rho = sd_eta / sd;
            let spec_margin_covs = if k == 1 { 1 } else { 2 };
            let mut theta = if k == 1 {
                vec![10.0, 0.5]
            } else {
                // s2(x) = (2+x)1{x<1/2} + (4-3x)1{x>=1/2} in the sp31/sp32 basis
                vec![1.0, 1.0, 1.5]
            };
            theta.push(sd.ln());
            theta.push(rho.atanh());
            ResolvedDgp {
                spec: ModelSpec::new(CopulaFamily::gaussian(), MarginKind::Gaussian, spec_margin_covs, 0),
                true_theta: theta,
                margin_design: if k == 1 { Columns(vec![("x", Uniform01)]) } else { Spline31 },
                copula_cols: vec![],
                mixed_gaussian: Some((sd_eta, sd_eps)),
            }
        }
        DgpId::Dgp(k @ (3 | 4)) => ResolvedDgp {
            spec: ModelSpec::new(
                CopulaFamily::gumbel(),
                MarginKind::Gaussian,
                if k == 3 { 1 } else { 2 },
                0,
            ),
            true_theta: if k == 3 {
                vec![10.0, 0.5, 1.5_f64.ln(), 0.0]
            } else {
                vec![1.0, 1.0, 1.5, 1.5_f64.ln(), 0.0]
            },
            margin_design: if k == 3 { Columns(vec![("x", Uniform01)]) } else { Spline31 },
            copula_cols: vec![],
            mixed_gaussian: None,
        },
        DgpId::Dgp(k @ (5 | 6)) => ResolvedDgp {
            spec: ModelSpec::new(
                CopulaFamily::clayton(),
                MarginKind::Poisson,
                if k == 5 { 1 } else { 2 },
                0,
            ),
            true_theta: if k == 5 { vec![0.0, 1.5, 0.0] } else { vec![1.0, 1.0, 1.5, 0.0] },
            margin_design: if k == 5 { Columns(vec![("x", Uniform01)]) } else { Spline31 },
            copula_cols: vec![],
            mixed_gaussian: None,
        },
        DgpId::Dgp(k @ (7 | 8)) => ResolvedDgp {
            spec: ModelSpec::new(
                frank,
                MarginKind::Bernoulli,
                if k == 7 { 1 } else { 2 },
                0,
            ),
            true_theta: if k == 7 {
                // s7(x) = -1.69 + 3x
                vec![-1.69, 3.0, 6.0]
            } else {
                // s8(x) = (-2.7+10.6x)1{x<=1/2} + (4.6-4x)1{x>1/2}
                vec![0.6, -3.3, 2.0, 6.0]
            },
            margin_design: if k == 7 { Columns(vec![("x", Uniform01)]) } else { Spline31 },
            copula_cols: vec![],
            mixed_gaussian: None,
        },
        DgpId::Dgp(k @ 9..=12) => {
            let (copula, margin, coef_hi): (CopulaFamily, MarginKind, f64) = match k {
                9 => (CopulaFamily::gaussian(), MarginKind::Gaussian, 1.0),
                10 => (CopulaFamily::gumbel(), MarginKind::Gaussian, 1.0),
                11 => (CopulaFamily::clayton(), MarginKind::Poisson, 0.5),
                _ => (frank, MarginKind::Bernoulli, 0.1),
            };
            let param = copula.tau_to_param(0.5)?;
            let predictor = copula.predictor_from_param(param)?;
            let mut theta: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..coef_hi)).collect();
            if margin.has_dispersion() {
                let sd: f64 = if k == 10 { rng.gen_range(3.0..10.0) } else { 1.0 };
                theta.push(sd.ln());
            }
            theta.push(predictor);
            let gen = if k <= 10 { Uniform01 } else { StdNormal };
            let cols: Vec<(&'static str, ColGen)> = [
                "x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "x9",
            ]
            .iter()
            .map(|n| (*n, gen))
            .collect();
            ResolvedDgp {
                spec: ModelSpec::new(copula, margin, 9, 0),
                true_theta: theta,
                margin_design: Columns(cols),
                copula_cols: vec![],
                mixed_gaussian: None,
            }
        }
        other => return Err(Error::input(format!("unknown DGP {other:?}"))),
    };
    Ok(res)
}

/// A simulated dataset with its generating model and latent values.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub dataset: ClusteredDataset,
    pub spec: ModelSpec,
    pub true_theta: ParamVector,
    pub param_names: Vec<String>,
    /// Latent V_k per cluster, in cluster order.
    pub latents: Vec<f64>,
}

/// Simulate a dataset from a catalog entry. Reproducible: the same `DgpSpec`
/// and RNG state give byte-identical data.
pub fn dgp<R: Rng>(spec: &DgpSpec, rng: &mut R) -> Result<SimulatedData> {
    dgp_with_resolution(spec, rng).map(|(sim, _)| sim)
}

fn dgp_with_resolution<R: Rng>(dgp: &DgpSpec, rng: &mut R) -> Result<(SimulatedData, ResolvedDgp)> {
    let resolved = resolve(dgp.id, rng)?;
    let theta = ParamVector::new(&resolved.spec, resolved.true_theta.clone())?;
    let margin_link = theta.margin_link(&resolved.spec);
    let mut rows = Vec::with_capacity(dgp.n_clusters * dgp.cluster_size);
    let mut latents = Vec::with_capacity(dgp.n_clusters);
    for k in 0..dgp.n_clusters {
        if let Some((sd_eta, sd_eps)) = resolved.mixed_gaussian {
            let z_eta: f64 = StandardNormal.sample(rng);
            let eta = sd_eta * z_eta;
            latents.push(crate::special::norm_cdf(eta / sd_eta));
            for _ in 0..dgp.cluster_size {
                let xm = resolved.draw_margin_row(rng);
                let mu = margin_link.predictor(&xm)?;
                let z_eps: f64 = StandardNormal.sample(rng);
                let eps = sd_eps * z_eps;
                rows.push(ObsRow {
                    cluster: k.to_string(),
                    y: mu + eta + eps,
                    x_margin: xm,
                    x_copula: vec![],
                });
            }
        } else {
            let v = rng.gen_range(1e-12..1.0 - 1e-12);
            latents.push(v);
            let xm: Vec<Vec<f64>> =
                (0..dgp.cluster_size).map(|_| resolved.draw_margin_row(rng)).collect();
            let xc: Vec<Vec<f64>> =
                (0..dgp.cluster_size).map(|_| resolved.draw_copula_row(rng)).collect();
            let y = sample_cluster_given_v(&resolved.spec, &theta, &xm, &xc, v, rng)?;
            for ((yi, xmi), xci) in y.into_iter().zip(xm).zip(xc) {
                rows.push(ObsRow { cluster: k.to_string(), y: yi, x_margin: xmi, x_copula: xci });
            }
        }
    }
    let copula_names = resolved.copula_cols.iter().map(|(n, _)| n.to_string()).collect();
    let dataset = ClusteredDataset::from_rows(rows, resolved.margin_names(), copula_names)?;
    let param_names =
        resolved.spec.param_names(dataset.margin_names(), dataset.copula_names())?;
    let sim = SimulatedData {
        dataset,
        spec: resolved.spec.clone(),
        true_theta: theta,
        param_names,
        latents,
    };
    Ok((sim, resolved))
}

/// Draw one new observation in an existing cluster (given its latent value),
/// returning the covariate rows and the response.
fn draw_new_obs<R: Rng>(
    resolved: &ResolvedDgp,
    theta: &ParamVector,
    v: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let xm = resolved.draw_margin_row(rng);
    let xc = resolved.draw_copula_row(rng);
    if let Some((sd_eta, sd_eps)) = resolved.mixed_gaussian {
        let mu = theta.margin_link(&resolved.spec).predictor(&xm)?;
        let eta = sd_eta * crate::special::norm_quantile(v);
        let z_eps: f64 = StandardNormal.sample(rng);
        return Ok((xm, xc, mu + eta + sd_eps * z_eps));
    }
    let y = sample_cluster_given_v(
        &resolved.spec,
        theta,
        std::slice::from_ref(&xm),
        std::slice::from_ref(&xc),
        v,
        rng,
    )?[0];
    Ok((xm, xc, y))
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov helpers for the sampler checks
// ---------------------------------------------------------------------------

/// One-sample KS statistic against a cdf.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i as f64 + 1.0) / n - f).abs());
    }
    d
}

/// Asymptotic KS p-value with the Stephens small-sample correction.
pub fn ks_pvalue(n: usize, d: f64) -> f64 {
    let sn = (n as f64).sqrt();
    let t = d * (sn + 0.12 + 0.11 / sn);
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1.0_f64).powi(k - 1) * (-2.0 * (k as f64) * (k as f64) * t * t).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Replication harness
// ---------------------------------------------------------------------------

/// Starting-point policy for harness fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartMode {
    /// Automatic starts for every candidate.
    Auto,
    /// True parameters for the generating family, automatic for the others.
    Truth,
}

/// Configuration of one Monte-Carlo campaign.
#[derive(Debug, Clone)]
pub struct HarnessConfig {
    pub dgp: DgpSpec,
    pub replications: usize,
    pub master_seed: u64,
    pub quad_nodes: usize,
    pub start: StartMode,
    /// Copula candidates by name ("independence" allowed); empty means the
    /// generating family only.
    pub candidates: Vec<String>,
    pub criterion: SelectionCriterion,
    /// Number of new observations predicted per replication (0 disables the
    /// prediction metrics).
    pub predict_new: usize,
    pub fit_options: FitOptions,
}

impl HarnessConfig {
    pub fn new(dgp: DgpSpec, replications: usize, master_seed: u64) -> Self {
        HarnessConfig {
            dgp,
            replications,
            master_seed,
            quad_nodes: 100,
            start: StartMode::Auto,
            candidates: Vec::new(),
            criterion: SelectionCriterion::Bic,
            predict_new: 0,
            fit_options: FitOptions::default(),
        }
    }
}

/// Prediction errors of one candidate in one replication.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionMetrics {
    pub rmse: f64,
    /// RMSE over the 5 largest realised new observations.
    pub rmse95: f64,
}

/// Everything recorded for one replication.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub replication: usize,
    pub true_params: Vec<f64>,
    /// Estimate from the generating-family candidate.
    pub estimate: Option<Vec<f64>>,
    pub se: Option<Vec<f64>>,
    pub converged: bool,
    pub chosen: Option<String>,
    pub criteria: Vec<(String, f64)>,
    pub prediction: Vec<(String, PredictionMetrics)>,
    pub failed: Option<String>,
}

/// Aggregated report of a campaign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarnessReport {
    pub dgp: String,
    pub n_clusters: usize,
    pub cluster_size: usize,
    pub replications: usize,
    pub master_seed: u64,
    /// Start-tau actually used for automatic starts.
    pub start_tau: f64,
    pub param_names: Vec<String>,
    pub outcomes: Vec<ReplicationOutcome>,
    /// Per-parameter RMSE of the generating-family estimates.
    pub param_rmse: Vec<f64>,
    /// Percent of replications each candidate was chosen.
    pub selection_pct: Vec<(String, f64)>,
    /// Mean prediction metrics per candidate.
    pub prediction_summary: Vec<(String, PredictionMetrics)>,
    pub failures: usize,
}

fn candidate_family(name: &str) -> Result<CopulaFamily> {
    CopulaFamily::parse(name)
}

fn run_replication(config: &HarnessConfig, rep: usize) -> ReplicationOutcome {
    let mut out = ReplicationOutcome {
        replication: rep,
        true_params: Vec::new(),
        estimate: None,
        se: None,
        converged: false,
        chosen: None,
        criteria: Vec::new(),
        prediction: Vec::new(),
        failed: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    rng.set_stream(rep as u64 + 1);
    let inner = (|| -> Result<()> {
        let sim_rng = &mut rng;
        let (sim, resolved) = dgp_with_resolution(&config.dgp, sim_rng)?;
        out.true_params = sim.true_theta.values().to_vec();
        let rule = QuadratureRule::latent_default(config.quad_nodes);
        let true_name = sim.spec.copula.name().to_string();
        let names: Vec<String> = if config.candidates.is_empty() {
            vec![true_name.clone()]
        } else {
            config.candidates.clone()
        };
        let mut fits: Vec<(String, ModelSpec, FitResult)> = Vec::new();
        for name in &names {
            let family = candidate_family(name)?;
            let spec = ModelSpec::new(
                family,
                sim.spec.margin,
                sim.spec.n_margin_covariates,
                sim.spec.n_copula_covariates,
            );
            let start = if config.start == StartMode::Truth && *name == true_name {
                Some(sim.true_theta.clone())
            } else {
                None
            };
            let fit_res = fit(&spec, &sim.dataset, &rule, start, &config.fit_options)?;
            out.criteria.push((name.clone(), config.criterion.value(&fit_res)));
            fits.push((name.clone(), spec, fit_res));
        }
        // Outcome of the generating-family candidate (or the first).
        let main = fits
            .iter()
            .position(|(n, _, _)| *n == true_name)
            .unwrap_or(0);
        out.estimate = Some(fits[main].2.theta.values().to_vec());
        out.se = fits[main].2.se.clone();
        out.converged = fits[main].2.converged;
        if fits.len() >= 2 {
            let mut best = 0usize;
            for i in 1..fits.len() {
                let (bv, bp) = (out.criteria[best].1, fits[best].1.param_count());
                let (iv, ip) = (out.criteria[i].1, fits[i].1.param_count());
                if iv < bv || (iv == bv && ip < bp) {
                    best = i;
                }
            }
            out.chosen = Some(fits[best].0.clone());
        }
        if config.predict_new > 0 {
            let mut news = Vec::with_capacity(config.predict_new);
            for i in 0..config.predict_new {
                let k = i % config.dgp.n_clusters;
                let (xm, xc, y) = draw_new_obs(&resolved, &sim.true_theta, sim.latents[k], sim_rng)?;
                news.push((k, xm, xc, y));
            }
            for (name, spec, fit_res) in &fits {
                let posts = latent_posteriors(spec, &fit_res.theta, &sim.dataset, &rule)?;
                let mut errs: Vec<(f64, f64)> = Vec::with_capacity(news.len());
                for (k, xm, xc, y) in &news {
                    let vhat = posts[*k].median;
                    let pred = cond_mean(spec, &fit_res.theta, xm, xc, vhat.clamp(1e-6, 1.0 - 1e-6))?;
                    errs.push((*y, pred - y));
                }
                let rmse =
                    (errs.iter().map(|(_, e)| e * e).sum::<f64>() / errs.len() as f64).sqrt();
                let mut by_y = errs.clone();
                by_y.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
                let top: Vec<f64> = by_y.iter().take(5).map(|(_, e)| *e).collect();
                let rmse95 = (top.iter().map(|e| e * e).sum::<f64>() / top.len() as f64).sqrt();
                out.prediction.push((name.clone(), PredictionMetrics { rmse, rmse95 }));
            }
        }
        Ok(())
    })();
    if let Err(e) = inner {
        out.failed = Some(e.to_string());
    }
    out
}

/// Run a Monte-Carlo campaign: replications execute in a worker pool, each
/// owning the RNG stream derived from the master seed and its index, and the
/// aggregation is deterministic.
pub fn run_harness(config: &HarnessConfig) -> Result<HarnessReport> {
    if config.replications == 0 {
        return Err(Error::input("harness needs at least one replication"));
    }
    let outcomes: Vec<ReplicationOutcome> = (0..config.replications)
        .into_par_iter()
        .map(|rep| run_replication(config, rep))
        .collect();
    // Parameter names from a deterministic probe resolution.
    let mut probe = ChaCha8Rng::seed_from_u64(config.master_seed);
    probe.set_stream(1);
    let probe_sim = dgp(&config.dgp, &mut probe)?;
    let param_names = probe_sim.param_names.clone();
    let dim = param_names.len();

    let ok: Vec<&ReplicationOutcome> =
        outcomes.iter().filter(|o| o.failed.is_none() && o.estimate.is_some()).collect();
    let mut param_rmse = vec![0.0; dim];
    if !ok.is_empty() {
        for o in &ok {
            let est = o.estimate.as_ref().unwrap();
            for j in 0..dim {
                let e = est[j] - o.true_params[j];
                param_rmse[j] += e * e;
            }
        }
        for v in param_rmse.iter_mut() {
            *v = (*v / ok.len() as f64).sqrt();
        }
    }
    let candidate_names: Vec<String> = if config.candidates.is_empty() {
        vec![probe_sim.spec.copula.name().to_string()]
    } else {
        config.candidates.clone()
    };
    let mut selection_pct = Vec::new();
    if candidate_names.len() >= 2 {
        for name in &candidate_names {
            let count = ok.iter().filter(|o| o.chosen.as_deref() == Some(name)).count();
            selection_pct.push((name.clone(), 100.0 * count as f64 / ok.len().max(1) as f64));
        }
    }
    let mut prediction_summary = Vec::new();
    if config.predict_new > 0 {
        for name in &candidate_names {
            let metrics: Vec<&PredictionMetrics> = ok
                .iter()
                .flat_map(|o| {
                    o.prediction.iter().filter(|(n, _)| n == name).map(|(_, m)| m)
                })
                .collect();
            if !metrics.is_empty() {
                let rmse = metrics.iter().map(|m| m.rmse).sum::<f64>() / metrics.len() as f64;
                let rmse95 = metrics.iter().map(|m| m.rmse95).sum::<f64>() / metrics.len() as f64;
                prediction_summary.push((name.clone(), PredictionMetrics { rmse, rmse95 }));
            }
        }
    }
    let failures = outcomes.iter().filter(|o| o.failed.is_some()).count();
    Ok(HarnessReport {
        dgp: config.dgp.id.name(),
        n_clusters: config.dgp.n_clusters,
        cluster_size: config.dgp.cluster_size,
        replications: config.replications,
        master_seed: config.master_seed,
        start_tau: config.fit_options.start_tau,
        param_names,
        outcomes,
        param_rmse,
        selection_pct,
        prediction_summary,
        failures,
    })
}

#[cfg(test)]
mod tests;
