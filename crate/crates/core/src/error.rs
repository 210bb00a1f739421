use thiserror::Error;

pub type Result<T> = std::result::Result<T, MemsError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MemsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field has {found} values but the grid has {expected} nodes")]
    GridMismatch { expected: usize, found: usize },

    #[error("field is {value} at Dirichlet node {node}, expected 0")]
    BoundaryViolation { node: usize, value: f64 },

    /// The field touched (or crossed) u = 1. Time integration reads this as quenching.
    #[error("field reaches the singularity: max u = {max_u} at node {node}")]
    Singular { max_u: f64, node: usize },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("iterative solver stalled at relative residual {residual:e}")]
    SolverNoConvergence { residual: f64 },

    #[error("linear system is numerically singular")]
    SingularMatrix,

    #[error("Newton did not converge: residual {residual:e} after {iters} iterations")]
    NoConvergence { residual: f64, iters: usize },

    #[error("Newton damping collapsed at residual {residual:e} (near the fold?)")]
    StepCollapse { residual: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("distance samples do not decay")]
    NoDecay,

    #[error("invalid bracket: {0}")]
    InvalidBracket(String),

    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}
