use thiserror::Error;

pub type Result<T> = std::result::Result<T, FinslerError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FinslerError {
    #[error("edge {index} is degenerate (speed {speed:e} <= {threshold:e})")]
    DegenerateEdge {
        index: usize,
        speed: f64,
        threshold: f64,
    },

    #[error("a closed curve needs at least 3 distinct points, found {found}")]
    TooFewPoints { found: usize },

    #[error("non-finite coordinate at node {index}")]
    NonFinite { index: usize },

    #[error("size mismatch: expected {expected} entries, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("projected gradient vanishes; the curve is critical")]
    ZeroGradient,

    #[error("gradient norm {norm:e} is below the stopping tolerance")]
    CriticalPoint { norm: f64 },

    #[error("direction is not a descent direction (slope {slope:e} >= 0)")]
    NotDescent { slope: f64 },

    #[error("cone program is infeasible")]
    Infeasible,

    #[error("cone solver failed: {0}")]
    Solver(String),

    #[error("line search failed: {0}")]
    LineSearch(String),
}
