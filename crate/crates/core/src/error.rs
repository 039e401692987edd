use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid instance {id}: {message}")]
    InvalidInstance { id: String, message: String },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid embedding table: {0}")]
    InvalidTable(String),

    #[error("token {0:?} is not in the embedding table")]
    OutOfVocabulary(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("cannot measure an angle against a zero vector")]
    ZeroVector,

    #[error("degenerate angle: inputs are colinear")]
    DegenerateAngle,

    #[error("theta out of range: cos(theta) = {cos_theta} must lie in (cos(alpha) = {cos_alpha}, 1)")]
    OutOfRangeTheta { cos_theta: f64, cos_alpha: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("schedule exhausted: {0}")]
    ExhaustedPairs(String),

    #[error("reconstruction failed for instance {id}: {message}")]
    Reconstruction { id: String, message: String },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("invalid statistics input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
