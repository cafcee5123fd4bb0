use std::path::PathBuf;

use thiserror::Error;

use crate::optim::EpochRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("negative sampling exhausted for tuple ({head}, {relation}, {tail}) after {tries} tries")]
    SamplingExhausted {
        head: String,
        relation: String,
        tail: String,
        tries: usize,
    },

    #[error("synthetic generation failed: {0}")]
    Generation(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown attribute `{0}` in attribute-entity map")]
    UnknownAttribute(String),

    #[error("training aborted at epoch {epoch}: {message}")]
    TrainingAborted {
        epoch: usize,
        message: String,
        history: Vec<EpochRecord>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
