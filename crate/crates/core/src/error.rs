use thiserror::Error;

/// Errors surfaced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// The field carries too much mass at the zero frequency for a
    /// `(2 pi rho)^-alpha` multiplier to be meaningful.
    #[error("mean not removed: |f^(0)| = {measured:e} exceeds {allowed:e}")]
    MeanNotRemoved { measured: f64, allowed: f64 },

    #[error("beta too small: the exceptional set covers the whole grid")]
    BetaTooSmall,

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_param(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn invalid_input(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn invalid_grid(msg: impl Into<String>) -> Error {
    Error::InvalidGrid(msg.into())
}
