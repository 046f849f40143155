use std::path::PathBuf;

use crate::gateway::GatewayError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("manifest: {0}")]
    Manifest(String),

    #[error("corpus: {0}")]
    Corpus(String),

    /// A malformed or inconsistent row in a line-oriented input file.
    #[error("{path}:{line}: {message}")]
    Row {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("missing sidecar: {0}")]
    MissingSidecar(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    /// The endpoint answered, but not in a form the pipeline accepts.
    #[error("unusable reply from {endpoint}: {message}")]
    Reply { endpoint: String, message: String },

    #[error(transparent)]
    Gateway(#[from] GatewayError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn row(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Row {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True when the failure originates from a remote endpoint rather than
    /// from local data.
    pub fn is_endpoint(&self) -> bool {
        matches!(self, Error::Gateway(_) | Error::Reply { .. })
    }
}
