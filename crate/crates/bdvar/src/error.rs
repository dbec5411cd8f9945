//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// The variants map onto the failure classes of the operations: bad inputs
/// (`Config`), per-path functional or feedback failures (`Eval`), Monte
/// Carlo estimators that cannot produce a finite answer (`Estimation`),
/// quadrature or root-finding breakdowns (`Numeric`), and optimizer
/// divergence (`Optimization`).
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("evaluation error at path {path_index}: {message}")]
    Eval { path_index: u64, message: String },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("optimization diverged: {0}")]
    Optimization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn eval(path_index: u64, msg: impl Into<String>) -> Self {
        Error::Eval {
            path_index,
            message: msg.into(),
        }
    }

    pub fn estimation(msg: impl Into<String>) -> Self {
        Error::Estimation(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
