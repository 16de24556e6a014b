use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("corpus file {path}, line {line}: {message}")]
    BadRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("document store: {0}")]
    Store(String),

    #[error("index: {0}")]
    Index(String),

    #[error("bad file format ({path}): {message}")]
    Format { path: PathBuf, message: String },

    #[error("annotator failed at token {index}: {message}")]
    Annotator { index: usize, message: String },

    #[error("configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty question")]
    EmptyQuestion,

    #[error("dataset {path}: {message}")]
    Dataset { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
