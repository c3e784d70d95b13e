use std::path::PathBuf;

use thiserror::Error;

use crate::scenario::Violation;
use crate::world::AgentId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("non-finite sample value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("sample count mismatch: {left} vs {right}")]
    SampleCountMismatch { left: usize, right: usize },

    #[error("no active faults")]
    NoActiveFaults,

    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),

    #[error("unknown traffic light {0}")]
    UnknownLight(u32),

    #[error("fault {index}: {reason}")]
    UnresolvableFault { index: usize, reason: String },

    #[error("scenario failed validation:\n  {}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("{path}: {message} (field `{field}`, line {line}, column {column})")]
    Parse {
        path: PathBuf,
        field: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: unsupported schema version {found} (expected {expected})")]
    SchemaVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("no scenarios")]
    NoScenarios,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input (schema, validation, parameters)
    /// rather than by the environment.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::Parse { .. }
                | Error::SchemaVersion { .. }
                | Error::Parameter(_)
        )
    }
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("\n  ")
}
