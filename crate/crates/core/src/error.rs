use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("node {node} out of range (graph has {n} nodes)")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("partition covers {partition} nodes but graph has {graph}")]
    PartitionMismatch { partition: usize, graph: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("modularity is undefined on a graph without arcs")]
    UndefinedModularity,

    #[error("embeddedness of node {node} is undefined (zero degree)")]
    UndefinedEmbeddedness { node: usize },

    #[error("ratio of node {node} is undefined (zero in-degree)")]
    UndefinedRatio { node: usize },

    #[error("cannot classify a node with in-degree {k_in} (below 500)")]
    BelowDegreeFloor { k_in: usize },

    #[error("Davies-Bouldin index undefined: {0}")]
    UndefinedIndex(String),

    #[error("degenerate clustering: {0}")]
    DegenerateClustering(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
