use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a documented invariant (N < 2, a ≤ 0, β < 0, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("frame mismatch: {0}")]
    Frame(String),
    #[error("not converged: {0}")]
    NoConvergence(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("output error: {0}")]
    Output(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
