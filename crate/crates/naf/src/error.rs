use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NafError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("shape mismatch in {op}: {detail}")]
    InvalidShape { op: &'static str, detail: String },

    #[error("decode error: {0}")]
    Decode(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("estimation failure: {0}")]
    EstimationFailure(String),

    #[error("missing files: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingFiles(Vec<PathBuf>),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl NafError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        NafError::Io {
            path: path.into(),
            source,
        }
    }

    /// One-word machine-parsable category used by the CLI exit path.
    pub fn category(&self) -> &'static str {
        match self {
            NafError::InvalidInput(_) => "invalid-input",
            NafError::InvalidConfig(_) => "invalid-config",
            NafError::InvalidDataset(_) => "invalid-dataset",
            NafError::InvalidShape { .. } => "invalid-shape",
            NafError::Decode(_) => "decode",
            NafError::Lookup(_) => "lookup",
            NafError::EstimationFailure(_) => "estimation-failure",
            NafError::MissingFiles(_) => "missing-files",
            NafError::Io { .. } => "io",
            NafError::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, NafError>;
