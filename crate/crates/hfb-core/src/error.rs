use thiserror::Error;

/// Crate-wide error type. Variants map onto the CLI / FFI exit codes:
/// `Usage` and `Config` are usage errors (exit 2), `Io` and `Format` are
/// I/O-level failures, everything else is a computation failure (exit 1).
#[derive(Debug, Error)]
pub enum HfbError {
    #[error("grid error: {0}")]
    Grid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("check failed: {0}")]
    CheckFailed(String),
}

pub type Result<T> = std::result::Result<T, HfbError>;
