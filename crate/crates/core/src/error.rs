use std::fmt;

use thiserror::Error;

/// Which graph a connectivity failure refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphId {
    First,
    Second,
    /// The product as a whole (e.g. a single-node product graph).
    Product,
}

impl fmt::Display for GraphId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphId::First => f.write_str("factor 1"),
            GraphId::Second => f.write_str("factor 2"),
            GraphId::Product => f.write_str("product graph"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("invalid weight at index {index}: {value}")]
    InvalidWeight { index: usize, value: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("{0} is disconnected")]
    DisconnectedGraph(GraphId),

    #[error("eigendecomposition failed")]
    DecompositionFailed,

    #[error("signal set is empty")]
    EmptySignalSet,

    #[error("iterate {iteration} disconnected {factor}; try a smaller step size (eta)")]
    DisconnectedIterate { factor: GraphId, iteration: usize },

    #[error("objective became non-finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("objective increased for {streak} consecutive iterations (at iteration {iteration}); step size too large")]
    StepTooLarge { iteration: usize, streak: usize },

    #[error("missing node ({i1}, {i2}) has no observed entry in its row or column")]
    EmptyNeighborhood { i1: usize, i2: usize },

    #[error("no fully observed row or column is available")]
    NoCleanFiber,

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("Laplacian has zero trace")]
    ZeroTrace,

    #[error("ground-truth support must contain at least one edge and one non-edge")]
    DegenerateSupport,

    #[error("need at least two points with distinct sample counts")]
    InsufficientPoints,

    #[error("failed to generate a connected graph after {attempts} attempts")]
    ConnectivityFailure { attempts: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed file {path}: {reason}")]
    Schema { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the failure came from the filesystem rather than the data.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Json(e) => e.is_io(),
            Error::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
