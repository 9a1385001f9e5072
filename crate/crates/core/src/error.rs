use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid dimension {0}: must be at least 1")]
    InvalidDimension(usize),

    #[error("matrix is not positive semidefinite: eigenvalue {min_eigenvalue:e} below tolerance (largest {max_eigenvalue:e})")]
    NotPsd {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("capacity exceeded: {requested} bytes requested, budget is {budget} bytes")]
    Capacity { requested: u64, budget: u64 },

    #[error("decomposition identity violated at step {step}: residual {residual:e}")]
    Decomposition { step: usize, residual: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
