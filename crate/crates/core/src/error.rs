use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),

    #[error("vertex {vertex} out of range for graph on {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("bad parameter: {0}")]
    BadParam(String),

    #[error("bad configuration: {0}")]
    BadConfig(String),

    #[error("orbit {0} out of range (30 triad orbits)")]
    OrbitOutOfRange(usize),

    #[error("operation undefined on the empty graph")]
    EmptyGraph,

    #[error("distribution does not sum to 1 (sum = {0})")]
    NotNormalized(f64),

    #[error("KL divergence undefined: Q vanishes where P is positive")]
    DomainMismatch,

    #[error("graph `{0}` is missing from the collection")]
    MissingGraph(String),

    #[error("metric unavailable: {0}")]
    MetricUnavailable(String),

    #[error("parameter distance undefined across models ({0} vs {1})")]
    ModelMismatch(String, String),

    #[error("bad k = {k} for {n} points")]
    BadK { k: usize, n: usize },

    #[error("bad clustering: {0}")]
    BadClustering(String),

    #[error("empty range of cluster counts")]
    EmptyRange,

    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error("significance level {0} outside (0, 1)")]
    BadAlpha(f64),

    #[error("negative sample distance covariance {0}")]
    NegativeDcov(f64),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
