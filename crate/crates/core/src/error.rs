use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Observed counts violate the binomial data invariants.
    #[error("invalid data: {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    /// An argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Hyperparameters or model selections are inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// An iterative or adaptive numerical routine failed to converge.
    #[error("numerical error: {message}")]
    Numerical {
        message: String,
        last_iterate: Option<Vec<f64>>,
    },

    #[error("insufficient precision: {0}")]
    Precision(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// A study record failed validation during ingestion.
    #[error("line {line}: study {study_id}: {source}")]
    Study {
        line: u64,
        study_id: i64,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn numerical(message: impl Into<String>) -> Self {
        Error::Numerical {
            message: message.into(),
            last_iterate: None,
        }
    }

    /// Short machine-readable code used when a failure is recorded in a result row.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Validation { .. } => "validation",
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::Numerical { .. } => "numerical",
            Error::Precision(_) => "precision",
            Error::Unsupported(_) => "unsupported",
            Error::Parse { .. } => "parse",
            Error::Study { source, .. } => source.code(),
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
