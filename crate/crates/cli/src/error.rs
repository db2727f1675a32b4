use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
    #[error(transparent)]
    Core(#[from] ssprofile::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Machine-readable form written on failure.
#[derive(Debug, Serialize)]
pub struct FailureReport {
    pub status: &'static str,
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn report(&self) -> FailureReport {
        let (kind, line, field) = match self {
            CliError::Parse { line, .. } => ("parse-error", Some(*line), None),
            CliError::Validation { field, .. } => ("validation-error", None, Some(field.clone())),
            CliError::Core(_) => ("computation-error", None, None),
            CliError::Io { .. } => ("io-error", None, None),
            CliError::Json(_) => ("serialization-error", None, None),
        };
        FailureReport { status: "error", kind, message: self.to_string(), line, field }
    }
}
