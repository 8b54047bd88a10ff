//! Model specification: copula family, margin family, and the shape of the
//! covariate links.

use crate::copulas::CopulaFamily;
use crate::error::{Error, Result};
use crate::margins::MarginKind;

/// A full model specification. Covariate columns are selected when the
/// dataset is built; the model spec records how many enter each link.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub copula: CopulaFamily,
    pub margin: MarginKind,
    pub n_margin_covariates: usize,
    pub n_copula_covariates: usize,
}

impl ModelSpec {
    pub fn new(
        copula: CopulaFamily,
        margin: MarginKind,
        n_margin_covariates: usize,
        n_copula_covariates: usize,
    ) -> Self {
        ModelSpec { copula, margin, n_margin_covariates, n_copula_covariates }
    }

    /// Number of margin entries: intercept, covariate coefficients and the
    /// dispersion slot for the Gaussian margin.
    pub fn margin_param_count(&self) -> usize {
        1 + self.n_margin_covariates + usize::from(self.margin.has_dispersion())
    }

    /// Number of copula entries (zero under independence).
    pub fn copula_param_count(&self) -> usize {
        if self.copula.has_parameter() {
            1 + self.n_copula_covariates
        } else {
            0
        }
    }

    pub fn param_count(&self) -> usize {
        self.margin_param_count() + self.copula_param_count()
    }

    /// Human-readable parameter names in flat-vector order.
    pub fn param_names(&self, margin_cov: &[String], copula_cov: &[String]) -> Result<Vec<String>> {
        if margin_cov.len() != self.n_margin_covariates || copula_cov.len() != self.n_copula_covariates
        {
            return Err(Error::dimension("covariate name lists do not match the model spec"));
        }
        let mut names = Vec::with_capacity(self.param_count());
        names.push("margin.intercept".to_string());
        for c in margin_cov {
            names.push(format!("margin.{c}"));
        }
        if self.margin.has_dispersion() {
            names.push("margin.log_sd".to_string());
        }
        if self.copula.has_parameter() {
            names.push("copula.intercept".to_string());
            for c in copula_cov {
                names.push(format!("copula.{c}"));
            }
        }
        Ok(names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts() {
        let s = ModelSpec::new(CopulaFamily::clayton(), MarginKind::Gaussian, 0, 0);
        assert_eq!(s.margin_param_count(), 2); // intercept + log_sd
        assert_eq!(s.copula_param_count(), 1);
        assert_eq!(s.param_count(), 3);

        let s = ModelSpec::new(CopulaFamily::frank(), MarginKind::Poisson, 2, 2);
        assert_eq!(s.param_count(), 3 + 3);

        let s = ModelSpec::new(CopulaFamily::independence(), MarginKind::Bernoulli, 1, 0);
        assert_eq!(s.copula_param_count(), 0);
        assert_eq!(s.param_count(), 2);
    }

    #[test]
    fn names_follow_layout() {
        let s = ModelSpec::new(CopulaFamily::gaussian(), MarginKind::Gaussian, 1, 1);
        let names = s
            .param_names(&["z".to_string()], &["u".to_string()])
            .unwrap();
        assert_eq!(
            names,
            vec!["margin.intercept", "margin.z", "margin.log_sd", "copula.intercept", "copula.u"]
        );
    }
}
