use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("vertex {v} out of range for a graph with {n} vertices")]
    VertexOutOfRange { v: usize, n: usize },

    #[error("self-loop at vertex {v}")]
    SelfLoop { v: usize },

    #[error("{n} vertices exceeds the supported maximum of {max}")]
    TooManyVertices { n: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("independent-set count exceeds cap {cap} (true count is at least {lower_bound})")]
    EnumerationCap { cap: usize, lower_bound: usize },

    #[error("state-space size {size} exceeds cap {cap}")]
    CapExceeded { size: usize, cap: usize },

    #[error("configuration {bits:#b} is not feasible")]
    Infeasible { bits: u64 },

    #[error("update set {bits:#b} is not independent")]
    NotIndependent { bits: u64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operation requires an explicit update-set distribution")]
    NotExplicit,

    #[error("distribution mass {total} is not normalized to 1")]
    NotNormalized { total: f64 },

    #[error("transition matrix is reducible")]
    Reducible,

    #[error("mixing-time iteration cap {cap} exceeded")]
    IterationCap { cap: u64 },

    #[error("precondition violated: {0}")]
    Precondition(String),
}
