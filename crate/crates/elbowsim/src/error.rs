//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the simulator, identification and training code.
///
/// `Validation` means a configuration or specification invariant was violated
/// before any work started (the CLI maps it to exit code 1). Everything else
/// is a runtime failure (exit code 2).
#[derive(Debug, Error)]
pub enum Error {
    /// A config/spec invariant does not hold. The message names the invariant.
    #[error("validation: {0}")]
    Validation(String),

    /// Bad runtime input to a numeric routine (non-finite values, mismatched
    /// sampling, out-of-range actions).
    #[error("domain: {0}")]
    Domain(String),

    /// An identification fit could not produce a usable estimate.
    #[error("fit: {0}")]
    Fit(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Exit code the CLI should report for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Config(_) => 1,
            _ => 2,
        }
    }
}
