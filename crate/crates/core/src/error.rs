use thiserror::Error;

/// Errors produced by the estimation, resampling and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the inputs was violated (too few identities, bad alpha, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The data itself is inconsistent: missing or duplicated comparisons.
    #[error("data error: {0}")]
    Data(String),

    /// The resampler could not produce a usable replicate.
    #[error("resampling failed: {0}")]
    Resampling(String),

    /// Malformed input file; `line` is 1-based when known.
    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<u64>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
