use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("infinite distance: graph is not connected")]
    InfiniteDistance,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("coercivity error: {0}")]
    Coercivity(String),
    #[error("audit failure: {0}")]
    Audit(String),
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("no oracle available: {0}")]
    NoOracle(String),
    #[error("expression error: {0}")]
    Expr(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
