use thiserror::Error;

/// Errors raised by the planning library.
#[derive(Debug, Error)]
pub enum PlanError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid box {index}: {reason}")]
    InvalidBox { index: usize, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("conic solver failed ({status}): {detail}")]
    Solver { status: String, detail: String },

    #[error("degenerate direction at node {node}: adjacent segment has zero length")]
    DegenerateDirection { node: usize },

    #[error("polygonal phase exceeded its iteration cap of {cap}")]
    IterationCap { cap: usize },

    #[error("enumeration guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("file format error: {0}")]
    Format(String),

    #[error("stale preprocessing cache: scene hash {expected} does not match cache hash {found}")]
    StaleCache { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PlanError>;
