use std::io;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("{0}")]
    InvalidArgument(String),

    /// A caller-supplied callback broke its contract (e.g. a denoiser
    /// returned an image of the wrong size).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// A file could not be decoded.
    #[error("malformed image: {0}")]
    Format(String),

    /// A computation produced a non-finite value.
    #[error("non-finite loss at step {step}: {detail}")]
    Numerical { step: usize, detail: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
