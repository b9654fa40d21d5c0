use thiserror::Error;

use crate::rlp::RlpError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// A caller-supplied value violates an operation's preconditions.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A search ran out of digest evaluations before finding a collision.
    #[error("budget exhausted after {evaluations} digest evaluations")]
    Exhausted { evaluations: u64 },

    #[error(transparent)]
    Rlp(#[from] RlpError),

    /// A stored document or transcript failed re-verification.
    #[error("verification failed: {0}")]
    Verification(String),

    #[error("malformed document: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
