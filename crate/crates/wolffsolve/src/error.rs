use thiserror::Error;

/// Errors surfaced by measure construction, potential evaluation and solves.
///
/// A divergent potential is not an error: `+inf` is a first-class value of
/// [`crate::potential::PotentialValue`]. Errors are reserved for invalid
/// inputs, unsupported combinations and iteration failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("did not converge: {0}")]
    NotConverged(String),

    /// A structural assumption of the solver was violated at runtime
    /// (e.g. an iterate escaped the monotone sandwich).
    #[error("internal error: {0}")]
    Internal(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
}
