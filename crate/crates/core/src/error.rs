use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("geometry mismatch: expected {expected}, found {found}")]
    Geometry { expected: String, found: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("empty mask: {0}")]
    EmptyMask(&'static str),

    #[error("backend failure in stage `{stage}`: {message}")]
    Backend { stage: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn geometry(expected: impl ToString, found: impl ToString) -> Self {
        Error::Geometry {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn backend(stage: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Backend {
            stage: stage.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
