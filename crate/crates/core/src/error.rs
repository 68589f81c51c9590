use std::path::PathBuf;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, thiserror::Error)]
pub enum HadError {
    #[error("hyperedge {edge} is empty")]
    EmptyEdge { edge: usize },

    #[error("node index {node} out of range (num_nodes = {num_nodes}){}", edge.map(|e| format!(" in hyperedge {e}")).unwrap_or_default())]
    NodeIndexOutOfRange {
        node: usize,
        num_nodes: usize,
        edge: Option<usize>,
    },

    #[error("feature matrix has {found} rows, expected {expected}")]
    FeatureRowMismatch { expected: usize, found: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("forward trace does not match the supplied parameters: {0}")]
    TraceMismatch(String),

    #[error("candidate hyperedge is empty")]
    EmptyCandidate,

    #[error("cannot compute a centroid over zero hyperedges")]
    EmptyEdgeSet,

    #[error("non-finite loss {loss} at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("missing labels: {0}")]
    MissingLabels(String),

    #[error("too few inliers: {found} available, at least {needed} required")]
    TooFewInliers { needed: usize, found: usize },

    #[error("AUROC needs both inliers and anomalies")]
    SingleClassOnly,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HadError>;

impl HadError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HadError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        HadError::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }
}
