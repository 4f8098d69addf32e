use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: edge references undeclared node `{node}`")]
    UndeclaredNode { line: usize, node: String },

    #[error("line {line}: node `{node}` declared twice")]
    DuplicateNode { line: usize, node: String },

    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),

    #[error("node `{node}` is not part of fragment {fragment}")]
    NotInFragment { node: NodeId, fragment: usize },

    #[error("invalid fragment count {k} for a graph with {nodes} nodes")]
    InvalidFragmentCount { k: usize, nodes: usize },

    #[error("partition does not assign node `{0}`")]
    UnassignedNode(NodeId),

    #[error("fragment indices are not contiguous: index {0} is unused")]
    NonContiguousFragments(usize),

    #[error("invalid pattern at offset {offset}: {message}")]
    Pattern { offset: usize, message: String },

    #[error("variable `{0}` is referenced but never defined")]
    DanglingVariable(String),

    #[error("no equation for the query source `{0}`")]
    MissingSource(NodeId),

    #[error("malformed message: {0}")]
    Wire(String),

    #[error("{0}")]
    Unsupported(String),
}
