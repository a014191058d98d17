use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("Pickands constant H_{index} is required but was not supplied (fBm with Hurst index h uses H_{{2h}})")]
    MissingPickands { index: f64 },

    #[error("covariance is not positive semi-definite (most negative eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("could not bracket the generalized inverse at level {level}: function stays at or below it up to {reached:.3e}")]
    Bracket { level: f64, reached: f64 },

    #[error("insufficient tail data: {0}")]
    InsufficientData(String),

    #[error("splitting level {level} has passage fraction 0 (from {from}); use closer intermediate levels")]
    DegenerateLevel { level: f64, from: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
