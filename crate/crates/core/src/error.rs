//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by model evaluation, estimation and data handling.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed to reach its tolerance.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Vector or matrix dimensions do not match the model layout.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Malformed or inconsistent input data.
    #[error("input error: {0}")]
    Input(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Attach an observation index to an error bubbling out of a
    /// per-observation evaluation.
    pub(crate) fn at_observation(self, index: usize) -> Self {
        match self {
            Error::Domain(m) => Error::Domain(format!("observation {index}: {m}")),
            Error::Numeric(m) => Error::Numeric(format!("observation {index}: {m}")),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
