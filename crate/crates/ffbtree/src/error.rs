use thiserror::Error;

use crate::NodeId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    /// Pager used out of order (nested begin, access outside an operation, ...).
    #[error("pager protocol error: {0}")]
    Protocol(String),
    #[error("unknown node {0:?}")]
    UnknownNode(NodeId),
    #[error("structural error: {0}")]
    Structural(String),
    /// A state the algorithms are supposed to make impossible.
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = TreeError> = std::result::Result<T, E>;
