use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A value fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Shapes or configuration fields do not conform.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data failed validation or parsing.
    #[error("parse error: {0}")]
    Parse(String),

    /// A guard on problem size was violated.
    #[error("instance too large: {0}")]
    Guard(String),

    /// A calibration regression was degenerate.
    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
