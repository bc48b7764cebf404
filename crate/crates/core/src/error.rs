use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A row of delimited input could not be parsed.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Column roles or label variants are inconsistent.
    #[error("schema error: {0}")]
    Schema(String),

    /// A caller violated a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numeric argument is outside the function's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The input is too degenerate for the requested operation.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A configuration value is out of range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A model file has a format version this build cannot read.
    #[error("unsupported model format version {found} (supported: {supported:?})")]
    Version { found: u32, supported: Vec<u32> },

    /// A model file is truncated or corrupted.
    #[error("model file integrity check failed: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::$variant(format!($($arg)+)));
        }
    };
}

pub(crate) use ensure;
