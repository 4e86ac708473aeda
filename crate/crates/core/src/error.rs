use thiserror::Error;

use crate::graph::Edge;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: usize },

    #[error("edge ({}, {}) is not in the graph", .0.0, .0.1)]
    MissingEdge(Edge),

    #[error("cannot sample {requested} negative pairs, only {available} candidates exist")]
    InfeasibleNegatives { requested: usize, available: usize },

    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("loss became non-finite at step {0}")]
    NonFinite(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
