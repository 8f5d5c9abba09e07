use std::path::PathBuf;

use thiserror::Error;

/// Coarse error classes. They map one-to-one onto CLI exit codes and FFI
/// status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad configuration or arguments.
    Usage,
    /// Input data could not be read or violates an invariant.
    Data,
    /// The computation ran but produced no valid solution.
    Degenerate,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {message}")]
    Format { context: String, message: String },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("row {row} has {found} values, expected {expected}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate key (annotator_id={annotator_id}, item_id={item_id})")]
    DuplicateKey {
        annotator_id: String,
        item_id: String,
    },
    #[error("embedding row {row} (annotator_id={annotator_id}, item_id={item_id}) has no annotation")]
    MissingAnnotation {
        row: usize,
        annotator_id: String,
        item_id: String,
    },
    #[error("annotators missing from metadata: {}", .0.join(", "))]
    MissingMetadata(Vec<String>),
    #[error("unknown attribute '{0}'")]
    UnknownAttribute(String),
    #[error("label '{label}' is not in the declared label set")]
    UnknownLabel { label: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Degenerate(String),
    #[error("covariance of component {component} is singular after regularization")]
    SingularCovariance { component: usize },
    #[error("row {row} has zero norm")]
    ZeroNorm { row: usize },
    #[error("{count} records have no predicted_label")]
    MissingPredictions { count: usize },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_) => ErrorKind::Usage,
            Error::Degenerate(_) | Error::SingularCovariance { .. } => ErrorKind::Degenerate,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::InvalidConfig(message.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
