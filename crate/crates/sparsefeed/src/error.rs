//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or state (precondition violations).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Configuration text problems; names the offending key.
    #[error("config error: {0}")]
    Config(String),

    /// Dataset parse problems, with file position where known.
    #[error("data error: {0}")]
    Data(String),

    /// The exact real-minus-shadow identity failed; implementation bug.
    #[error("shadow identity violated at round {round}: {detail}")]
    ShadowIdentity { round: u64, detail: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
