use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph generation failed after {retries} attempts: {reason}")]
    GenerationFailure { retries: usize, reason: String },

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("adversary contract violated: {0}")]
    ContractViolation(String),

    #[error("invariant violated at step {step}: {detail}")]
    InvariantViolation { step: u64, detail: String },

    #[error("bottleneck ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("parameters outside the formula's regime: {0}")]
    OutOfRegime(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
