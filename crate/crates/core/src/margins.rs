//! Parametric margin families with covariate links.
//!
//! The conditional distribution of the response given covariates is
//! `G_{h(alpha, x)}`; the links prepend an intercept to the covariate row and
//! map the linear predictor to the family's parameter (identity mean for
//! Gaussian, log rate for Poisson, logit probability for Bernoulli). The
//! Gaussian margin carries a dispersion entry parameterised as log-sigma so
//! the optimiser works unconstrained.

use crate::error::{Error, Result};
use crate::special::{logistic, norm_cdf, norm_pdf, norm_quantile};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

/// Floor for the Gaussian dispersion (log-sigma >= ln 1e-6).
pub const LOG_SD_FLOOR: f64 = -13.815_510_557_964_274;

/// Reference measure of a margin family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMeasure {
    Lebesgue,
    Counting,
}

/// The supported margin families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginKind {
    Gaussian,
    Poisson,
    Bernoulli,
}

impl MarginKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(MarginKind::Gaussian),
            "poisson" => Ok(MarginKind::Poisson),
            "bernoulli" => Ok(MarginKind::Bernoulli),
            other => Err(Error::input(format!(
                "unknown margin family '{other}' (expected gaussian, poisson or bernoulli)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MarginKind::Gaussian => "gaussian",
            MarginKind::Poisson => "poisson",
            MarginKind::Bernoulli => "bernoulli",
        }
    }

    pub fn reference_measure(self) -> ReferenceMeasure {
        match self {
            MarginKind::Gaussian => ReferenceMeasure::Lebesgue,
            _ => ReferenceMeasure::Counting,
        }
    }

    pub fn is_discrete(self) -> bool {
        self.reference_measure() == ReferenceMeasure::Counting
    }

    pub fn has_dispersion(self) -> bool {
        self == MarginKind::Gaussian
    }
}

/// Margin parameter at one covariate value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginParam {
    Gaussian { mean: f64, sd: f64 },
    Poisson { rate: f64 },
    Bernoulli { p: f64 },
}

impl MarginParam {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            MarginParam::Gaussian { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            MarginParam::Poisson { rate } => rate > 0.0 && rate.is_finite(),
            MarginParam::Bernoulli { p } => p > 0.0 && p < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid margin parameter {self:?}")))
        }
    }

    pub fn kind(&self) -> MarginKind {
        match self {
            MarginParam::Gaussian { .. } => MarginKind::Gaussian,
            MarginParam::Poisson { .. } => MarginKind::Poisson,
            MarginParam::Bernoulli { .. } => MarginKind::Bernoulli,
        }
    }

    /// G(y), the conditional cdf of the response.
    pub fn cdf(&self, y: f64) -> f64 {
        match *self {
            MarginParam::Gaussian { mean, sd } => norm_cdf((y - mean) / sd),
            MarginParam::Poisson { rate } => {
                if y < 0.0 {
                    0.0
                } else {
                    gamma_ur(y.floor() + 1.0, rate)
                }
            }
            MarginParam::Bernoulli { p } => {
                if y < 0.0 {
                    0.0
                } else if y < 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
        }
    }

    /// G(y-), the left limit of the cdf; equals G(y) for Lebesgue margins and
    /// is exactly 0 at the support minimum of counting margins.
    pub fn cdf_left(&self, y: f64) -> f64 {
        match *self {
            MarginParam::Gaussian { .. } => self.cdf(y),
            MarginParam::Poisson { .. } => {
                if y < 1.0 {
                    0.0
                } else {
                    self.cdf(y.floor() - 1.0)
                }
            }
            MarginParam::Bernoulli { p } => {
                if y <= 0.0 {
                    0.0
                } else if y <= 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
        }
    }

    /// Density (Lebesgue) or probability mass (counting) at y.
    pub fn pdf_or_pmf(&self, y: f64) -> f64 {
        match *self {
            MarginParam::Gaussian { mean, sd } => norm_pdf((y - mean) / sd) / sd,
            MarginParam::Poisson { rate } => {
                if y < 0.0 || y.fract() != 0.0 {
                    0.0
                } else {
                    (y * rate.ln() - rate - ln_gamma(y + 1.0)).exp()
                }
            }
            MarginParam::Bernoulli { p } => {
                if y == 0.0 {
                    1.0 - p
                } else if y == 1.0 {
                    p
                } else {
                    0.0
                }
            }
        }
    }

    /// log pdf, defined for the continuous margin only.
    pub fn log_pdf(&self, y: f64) -> f64 {
        match *self {
            MarginParam::Gaussian { mean, sd } => {
                let z = (y - mean) / sd;
                -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            _ => self.pdf_or_pmf(y).ln(),
        }
    }

    /// Left-inverse quantile: inf { y : G(y) >= u }.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!("quantile requires u in (0,1), got {u}")));
        }
        Ok(match *self {
            MarginParam::Gaussian { mean, sd } => mean + sd * norm_quantile(u),
            MarginParam::Poisson { rate } => {
                let cap = (rate + 40.0 * rate.sqrt() + 10.0).ceil();
                let mut k = rate.floor();
                if self.cdf(k) >= u {
                    while k > 0.0 && self.cdf(k - 1.0) >= u {
                        k -= 1.0;
                    }
                    if self.cdf(0.0) >= u {
                        k = 0.0;
                    }
                } else {
                    while self.cdf(k) < u && k < cap {
                        k += 1.0;
                    }
                }
                k
            }
            MarginParam::Bernoulli { p } => {
                if u <= 1.0 - p {
                    0.0
                } else {
                    1.0
                }
            }
        })
    }

    /// Mean of the margin.
    pub fn mean(&self) -> f64 {
        match *self {
            MarginParam::Gaussian { mean, .. } => mean,
            MarginParam::Poisson { rate } => rate,
            MarginParam::Bernoulli { p } => p,
        }
    }

    /// Derivative of the natural parameter (mean, rate or p) with respect to
    /// the linear predictor.
    pub(crate) fn dparam_dpredictor(&self) -> f64 {
        match *self {
            MarginParam::Gaussian { .. } => 1.0,
            MarginParam::Poisson { rate } => rate,
            MarginParam::Bernoulli { p } => p * (1.0 - p),
        }
    }

    /// dG(y)/d(natural parameter).
    pub(crate) fn dcdf_dparam(&self, y: f64) -> f64 {
        match *self {
            MarginParam::Gaussian { mean, sd } => -norm_pdf((y - mean) / sd) / sd,
            MarginParam::Poisson { .. } => {
                if y < 0.0 {
                    0.0
                } else {
                    -self.pdf_or_pmf(y.floor())
                }
            }
            MarginParam::Bernoulli { .. } => {
                if (0.0..1.0).contains(&y) {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// dG(y-)/d(natural parameter).
    pub(crate) fn dcdf_left_dparam(&self, y: f64) -> f64 {
        match *self {
            MarginParam::Gaussian { .. } => self.dcdf_dparam(y),
            MarginParam::Poisson { .. } => {
                if y < 1.0 {
                    0.0
                } else {
                    -self.pdf_or_pmf(y.floor() - 1.0)
                }
            }
            MarginParam::Bernoulli { .. } => {
                if y > 0.0 && y <= 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// dG(y)/d(log sd), Gaussian only.
    pub(crate) fn dcdf_dlogsd(&self, y: f64) -> f64 {
        match *self {
            MarginParam::Gaussian { mean, sd } => {
                let z = (y - mean) / sd;
                -z * norm_pdf(z)
            }
            _ => 0.0,
        }
    }

    /// d log g(y)/d(natural parameter), continuous margins only.
    pub(crate) fn dlogpdf_dparam(&self, y: f64) -> f64 {
        match *self {
            MarginParam::Gaussian { mean, sd } => (y - mean) / (sd * sd),
            _ => 0.0,
        }
    }

    /// d log g(y)/d(log sd), Gaussian only.
    pub(crate) fn dlogpdf_dlogsd(&self, y: f64) -> f64 {
        match *self {
            MarginParam::Gaussian { mean, sd } => {
                let z = (y - mean) / sd;
                z * z - 1.0
            }
            _ => 0.0,
        }
    }
}

/// Covariate link for the margin: intercept-first coefficients plus an
/// optional dispersion slot (log-sigma, Gaussian only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginLink {
    pub kind: MarginKind,
    /// Intercept followed by one coefficient per margin covariate.
    pub coefficients: Vec<f64>,
    /// log sigma for the Gaussian margin; None otherwise.
    pub dispersion: Option<f64>,
}

impl MarginLink {
    pub fn new(kind: MarginKind, coefficients: Vec<f64>, dispersion: Option<f64>) -> Result<Self> {
        match (kind.has_dispersion(), dispersion.is_some()) {
            (true, false) => {
                return Err(Error::dimension("Gaussian margin requires a dispersion entry"))
            }
            (false, true) => {
                return Err(Error::dimension(format!(
                    "{} margin takes no dispersion entry",
                    kind.name()
                )))
            }
            _ => {}
        }
        if coefficients.is_empty() {
            return Err(Error::dimension("margin link needs at least an intercept"));
        }
        Ok(MarginLink { kind, coefficients, dispersion })
    }

    /// Linear predictor at covariate row `x` (without the intercept column).
    pub fn predictor(&self, x: &[f64]) -> Result<f64> {
        if x.len() + 1 != self.coefficients.len() {
            return Err(Error::dimension(format!(
                "margin link expects {} covariates, got {}",
                self.coefficients.len() - 1,
                x.len()
            )));
        }
        let mut s = self.coefficients[0];
        for (a, xi) in self.coefficients[1..].iter().zip(x) {
            s += a * xi;
        }
        Ok(s)
    }

    /// Margin parameter at covariate row `x`.
    pub fn param_at(&self, x: &[f64]) -> Result<MarginParam> {
        let s = self.predictor(x)?;
        let param = match self.kind {
            MarginKind::Gaussian => MarginParam::Gaussian {
                mean: s,
                sd: self.dispersion.expect("validated").max(LOG_SD_FLOOR).exp(),
            },
            MarginKind::Poisson => MarginParam::Poisson { rate: s.exp() },
            MarginKind::Bernoulli => MarginParam::Bernoulli { p: logistic(s) },
        };
        param.validate()?;
        Ok(param)
    }
}
