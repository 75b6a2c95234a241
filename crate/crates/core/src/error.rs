use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("empty graph")]
    EmptyGraph,

    #[error("empty node mask")]
    EmptyMask,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("topology mismatch: {0}")]
    Topology(String),

    #[error("subspace iteration did not converge to tolerance {tol:e} within {iters} iterations")]
    NoConvergence { tol: f64, iters: usize },

    #[error("no labeled nodes in batch")]
    NoLabeledNodes,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
