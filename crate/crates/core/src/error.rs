use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error at line {line}: {}", fields.join(", "))]
    Validation { line: usize, fields: Vec<String> },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("training diverged at epoch {epoch}, step {step} (learning rate {learning_rate}): loss = {loss}")]
    Divergence {
        epoch: usize,
        step: usize,
        learning_rate: f64,
        loss: f64,
    },

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("no scorable words")]
    NoScorableWords,

    #[error("enumeration refused: {0}")]
    Enumeration(String),

    #[error("model step failed for prefix {prefix:?}: {source}")]
    Step {
        prefix: Vec<u32>,
        #[source]
        source: Box<Error>,
    },

    #[error("plugin error: {0}")]
    Plugin(String),

    #[error("{0}")]
    Invalid(String),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
