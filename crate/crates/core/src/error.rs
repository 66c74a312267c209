use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("score kind mismatch: {0}")]
    KindMismatch(String),

    #[error("genome out of bounds: {0}")]
    GenomeOutOfBounds(String),

    #[error("none of the listed classes is present in either mask")]
    NoClassPresent,

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("failed to spawn backend `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },

    #[error("backend handshake timed out after {0:?}")]
    HandshakeTimeout(std::time::Duration),

    #[error("backend protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("unsupported operation: {0}")]
    UnsupportedOperation(String),

    #[error("backend error: {0}")]
    Backend(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("refusing to overwrite existing path {0}")]
    OutputExists(PathBuf),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
