use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid vector: {0}")]
    InvalidVector(String),

    #[error("duplicate utterance id `{0}`")]
    DuplicateId(String),

    #[error("unknown utterance id `{0}`")]
    UnknownId(String),

    #[error("trial set has no {0} pairs")]
    EmptyClass(&'static str),

    #[error("need at least {required} vectors, got {actual}")]
    TooFewVectors { required: usize, actual: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("eigendecomposition did not converge")]
    EigenNotConverged,

    #[error("degenerate data: rank {0} < 2")]
    Degenerate(usize),

    #[error("invalid policy: {0}")]
    Policy(String),

    #[error("invalid config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
