use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration file not found: {}", .0.display())]
    MissingConfig(std::path::PathBuf),

    /// The configuration document does not match the expected schema.
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    /// A value parsed fine but breaks a model invariant.
    #[error("validation failed: {0}")]
    Validation(String),

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two inputs that must agree (horizon, unit counts, set sizes) do not.
    #[error("inconsistent inputs: {0}")]
    Consistency(String),

    #[error("encoding length mismatch: expected {expected} values, got {actual}")]
    Encoding { expected: usize, actual: usize },

    #[error("malformed artifact: {0}")]
    Artifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Self::Domain(msg.into())
    }

    pub(crate) fn consistency(msg: impl Into<String>) -> Self {
        Self::Consistency(msg.into())
    }
}
