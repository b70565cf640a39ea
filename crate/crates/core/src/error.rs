use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument is outside the domain of the operation.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A model or experiment configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// The configuration is well-formed but the requested computation is undefined for it.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// A state that the algorithms guarantee can never occur.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    /// A numerical self-check or estimate did not meet its requirement.
    #[error("numerical diagnostic failed: {0}")]
    Diagnostic(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
