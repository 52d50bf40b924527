//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter violates its domain (nonpositive variance,
    /// invalid truncation interval, out-of-range probability, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A dataset violates a structural invariant.
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A numerical operation failed (singular design, factorization failure
    /// after jitter, non-finite intermediate).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A Gibbs chain failed mid-run; carries the iteration index.
    #[error("chain failed at iteration {iteration}: {source}")]
    ChainFailure {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    /// A conditional summary was requested for a model never visited by the chain.
    #[error("model never sampled: {0}")]
    ModelNotSampled(String),

    /// Draw-file or report I/O failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A draw file or config file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid_param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
