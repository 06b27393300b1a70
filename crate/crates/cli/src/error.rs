use std::path::PathBuf;

use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { message: String, line: usize, column: usize },

    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("task `{task}` failed: {source}")]
    Task {
        task: String,
        #[source]
        source: kirchhoff_core::Error,
    },

    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl CliError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Validation { .. } => "validation",
            CliError::Task { .. } => "task",
            CliError::Serialize(_) => "serialize",
        }
    }

    /// Machine-readable record printed on failure.
    pub fn to_record(&self) -> Value {
        let mut record = json!({ "kind": self.kind(), "message": self.to_string() });
        match self {
            CliError::Parse { line, column, .. } => {
                record["line"] = json!(line);
                record["column"] = json!(column);
            }
            CliError::Validation { field, .. } => record["field"] = json!(field),
            CliError::Task { task, source } => {
                record["task"] = json!(task);
                record["cause"] = json!(source.to_string());
            }
            CliError::Io { path, .. } => record["path"] = json!(path.display().to_string()),
            CliError::Serialize(_) => {}
        }
        json!({ "error": record })
    }

    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } => 2,
            _ => 1,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Serialize(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Serialize(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
