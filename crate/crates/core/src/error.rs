use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("structural mismatch: {0}")]
    StructuralMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("stability threshold undefined: matrix has no positive eigenvalue")]
    UndefinedThreshold,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("format error in {path} at byte offset {offset}: {message}")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("dataset not found: {0}")]
    DatasetNotFound(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::StructuralMismatch(_) => "structural_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::UndefinedThreshold => "undefined_threshold",
            Error::NumericalFailure(_) => "numerical_failure",
            Error::EmptyInput(_) => "empty_input",
            Error::Format { .. } => "format",
            Error::DatasetNotFound(_) => "dataset_not_found",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
