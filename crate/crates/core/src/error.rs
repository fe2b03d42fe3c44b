use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum ShsError {
    #[error("invalid edge ({0}, {1}) on a graph with {2} nodes")]
    InvalidEdge(usize, usize, usize),

    #[error("invalid node pair ({0}, {1})")]
    InvalidPair(usize, usize),

    #[error("node {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("invalid k = {k} for a graph with {n} nodes")]
    InvalidK { k: usize, n: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in layer {layer}")]
    NonFiniteLayer { layer: usize },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl ShsError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ShsError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        ShsError::InvalidConfig(msg.into())
    }

    /// Process exit code: 1 usage, 2 data/parse, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            ShsError::NonFiniteLayer { .. } | ShsError::Diverged { .. } => 3,
            ShsError::InvalidK { .. } | ShsError::InvalidConfig(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, ShsError>;
