use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// The integrated state stopped being finite. `field` names the first
    /// offending component of the packed state.
    #[error("simulation aborted at t = {t}: non-finite {field}")]
    NonFinite { field: String, t: f64 },

    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("scenario validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
