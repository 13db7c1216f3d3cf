use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid class {class} (expected {expected})")]
    InvalidClass { class: usize, expected: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("empty evaluation: confusion matrix has no samples")]
    EmptyEvaluation,

    #[error("class {class} has {count} ground-truth pixels, need at least {required}")]
    InsufficientClass {
        class: usize,
        count: usize,
        required: usize,
    },

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Malformed on-disk data. Every variant carries the byte offset where
/// parsing stopped.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic at offset {offset}: expected {expected:?}, found {found:?}")]
    BadMagic {
        offset: usize,
        expected: String,
        found: String,
    },

    #[error("unsupported version {found} at offset {offset} (expected {expected})")]
    BadVersion {
        offset: usize,
        expected: u16,
        found: u16,
    },

    #[error("truncated {what} at offset {offset}: expected {expected} bytes, found {actual}")]
    Truncated {
        what: String,
        offset: usize,
        expected: usize,
        actual: usize,
    },

    #[error("{actual} trailing bytes after offset {offset}")]
    TrailingBytes { offset: usize, actual: usize },

    #[error("invalid header at offset {offset}: {reason}")]
    BadHeader { offset: usize, reason: String },

    #[error("tensor {name:?} at offset {offset}: {reason}")]
    BadTensor {
        name: String,
        offset: usize,
        reason: String,
    },

    #[error("line {line}: {reason}")]
    BadConfigLine { line: usize, reason: String },
}
