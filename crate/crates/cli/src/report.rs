//! Serialisable report types written by the subcommands.

use copulamix::estimate::CovFlag;
use copulamix::{FitResult, ModelSpec};
use serde::{Deserialize, Serialize};

/// Model description stored in reports so downstream commands can rebuild
/// the model specification without re-supplying flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelInfo {
    pub copula: String,
    pub student_df: Option<f64>,
    pub margin: String,
    pub response_col: String,
    pub cluster_col: String,
    pub margin_covariates: Vec<String>,
    pub copula_covariates: Vec<String>,
}

impl ModelInfo {
    pub fn to_spec(&self) -> anyhow::Result<ModelSpec> {
        let copula = match (self.copula.as_str(), self.student_df) {
            ("student", Some(df)) => copulamix::CopulaFamily::student(df)?,
            (name, _) => copulamix::CopulaFamily::parse(name)?,
        };
        let margin = copulamix::MarginKind::parse(&self.margin)?;
        Ok(ModelSpec::new(copula, margin, self.margin_covariates.len(), self.copula_covariates.len()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptionsInfo {
    pub quad_nodes: usize,
    pub max_iter: usize,
    pub tol_grad: Option<f64>,
    pub start_tau: f64,
    pub start: String,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataInfo {
    pub n_obs: usize,
    pub n_clusters: usize,
    pub lambda_k: f64,
    pub rows_rejected: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateEntry {
    pub name: String,
    pub value: f64,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterEntry {
    pub id: String,
    pub n: usize,
    pub v_median: f64,
    pub v_mean: f64,
}

/// Full fit report (the `fit` subcommand output).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub model: ModelInfo,
    pub options: OptionsInfo,
    pub data: DataInfo,
    pub estimates: Vec<EstimateEntry>,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub grad_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub nan_encountered: bool,
    pub cov_flag: CovFlag,
    pub clusters: Vec<ClusterEntry>,
}

impl FitReport {
    pub fn theta(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.value).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub rank: usize,
    pub label: String,
    pub copula: String,
    pub margin: String,
    pub n_params: usize,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub converged: bool,
    pub criterion_value: f64,
    pub chosen: bool,
}

/// Ranked model-selection report (the `select` subcommand output).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectReport {
    pub criterion: String,
    pub data: DataInfo,
    pub candidates: Vec<CandidateEntry>,
}

pub fn estimate_entries(names: &[String], fit: &FitResult) -> Vec<EstimateEntry> {
    names
        .iter()
        .enumerate()
        .map(|(j, name)| EstimateEntry {
            name: name.clone(),
            value: fit.theta.values()[j],
            se: fit.se.as_ref().map(|s| s[j]),
        })
        .collect()
}
