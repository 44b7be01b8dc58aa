//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by dataset handling, curve evaluation, accounting and the
/// experiment pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("missing entries not allowed here: {0}")]
    MissingData(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("order outside curve domain: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("validity condition violated: {0}")]
    Validity(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("imputation error: {0}")]
    Imputation(String),

    #[error("scaling error: {0}")]
    Scaling(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
