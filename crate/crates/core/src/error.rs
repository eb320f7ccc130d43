use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller violated a precondition (shape mismatch, bad parameter, ...).
    #[error("{0}")]
    Usage(String),
    /// A function was evaluated outside of its domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The requested combination is deliberately not implemented.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// Non-finite values, failed factorisations, non-converging series.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// A study completed but its acceptance condition failed, or too many
    /// replicas aborted.
    #[error("study failed: {0}")]
    Study(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
