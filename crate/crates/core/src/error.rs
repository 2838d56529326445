use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures while reading or validating a graph directory.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid index: {0}")]
    InvalidIndex(String),
    #[error("label {label} of node {node} is out of range for {num_classes} classes")]
    LabelOutOfRange {
        node: usize,
        label: usize,
        num_classes: usize,
    },
    #[error("parse error in {file}: {msg}")]
    Parse { file: PathBuf, msg: String },
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("cannot add {requested} edges, only {available} node pairs are free")]
    TooManyNoiseEdges { requested: usize, available: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty node set")]
    EmptyNodeSet,
    #[error("loss is not a scalar (shape {0}x{1})")]
    NonScalarLoss(usize, usize),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("requested {requested} architectures but the search space holds {available}")]
    TooManyArchitectures { requested: usize, available: usize },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
