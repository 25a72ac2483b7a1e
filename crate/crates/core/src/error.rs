use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("not a checkpoint")]
    NotACheckpoint,

    #[error("not an embedding store")]
    NotAnEmbeddingStore,

    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("temperature must be positive, got {0}")]
    InvalidTemperature(f64),

    #[error("zero-norm vector has no cosine similarity")]
    ZeroNorm,

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::InvalidTemperature(_) => 2,
            Error::Numerical(_) | Error::ZeroNorm => 4,
            _ => 3,
        }
    }
}
