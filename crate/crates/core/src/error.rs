use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The sum-of-exponentials verifier could not certify the requested tolerance.
    #[error("SOE construction failed: achieved {achieved:e} > requested {requested:e}")]
    ConstructionFailed { achieved: f64, requested: f64 },

    #[error("state violation: {0}")]
    StateViolation(String),

    /// The model left its admissible regime (e.g. a non-positive SAV radicand).
    #[error("model violation: {0}")]
    ModelViolation(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
