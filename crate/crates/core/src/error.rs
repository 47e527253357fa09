use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no binding for leaf `{name}`")]
    MissingBinding { name: String },

    #[error("shape error at node {node}: {message}")]
    Shape { node: usize, message: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("truncated input at byte offset {offset}: {message}")]
    Truncated { offset: u64, message: String },

    #[error("training diverged in {stage} at epoch {epoch}")]
    TrainingDiverged { stage: String, epoch: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn shape(node: usize, msg: impl Into<String>) -> Self {
        Error::Shape {
            node,
            message: msg.into(),
        }
    }
}
