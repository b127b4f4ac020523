//! Error type shared across the crate.

use thiserror::Error;

/// Failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or qubit counts that cannot be combined.
    #[error("dimension mismatch: {0}")]
    Dim(String),

    /// A dense object larger than the materialization cap was requested.
    #[error("materialization too large: dimension {dim} exceeds cap {cap}")]
    TooLarge { dim: usize, cap: usize },

    /// NaN or infinity where a finite number was required.
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    /// An argument outside the documented domain.
    #[error("invalid argument: {0}")]
    Invalid(String),

    /// A numeric routine failed to converge or lost its preconditions.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn dim(msg: impl Into<String>) -> Self {
        Error::Dim(msg.into())
    }
}
