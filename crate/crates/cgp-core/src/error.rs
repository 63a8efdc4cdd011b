use thiserror::Error;

/// Errors surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum CgpError {
    /// Incompatible matrix or vector dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Invalid configuration (grid windows, flags, scenario names).
    #[error("configuration error: {0}")]
    Config(String),

    /// A factorization or solve failed beyond the jitter policy.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, CgpError>;
