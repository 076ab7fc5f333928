use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dataset {name}: expected {expected} {what}, found {found}")]
    CountMismatch {
        name: String,
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index {0} is not in the unlabeled pool")]
    NotUnlabeled(usize),

    #[error("unlabeled pool is empty")]
    EmptyPool,

    #[error("labeled set is empty")]
    EmptyLabeled,

    #[error("instance too large for exhaustive enumeration: {0}")]
    EnumerationLimit(String),

    #[error("overflow computing {0}")]
    Overflow(&'static str),

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trial {trial} ({strategy}): {source}")]
    Trial {
        trial: usize,
        strategy: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
