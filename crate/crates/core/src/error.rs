use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = TipError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TipError {
    #[error("dimension mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("index {index} out of range for {what} of size {len}")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("negative sampling saturated for relation {relation}: {detail}")]
    Saturated { relation: usize, detail: String },

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl TipError {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        TipError::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TipError::Io {
            path: path.into(),
            source,
        }
    }
}
