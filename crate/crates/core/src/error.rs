use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the solver pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("field does not belong to this grid")]
    GridMismatch,

    #[error("point ({x}, {y}) is not on the domain boundary")]
    NotOnBoundary { x: f64, y: f64 },

    #[error("grid too coarse near the boundary: {0}")]
    GridResolution(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e}); trace: {trace:?}")]
    NewtonDivergence {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("discrete convexity lost at iteration {iteration} (residual {residual:.3e}); trace: {trace:?}")]
    ConvexityLost {
        iteration: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("operator is not elliptic at interior node {node}")]
    NotElliptic { node: usize },

    #[error("linear system is singular or ill-conditioned (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },

    #[error("iterative linear solver stalled after {iterations} iterations (relative residual {residual:.3e})")]
    LinearSolverStalled { iterations: usize, residual: f64 },

    #[error("w fell below the floor {floor:.3e} (min {min_w:.3e}) after t = {last_good_t}; a solution may not exist")]
    WFloorBreach {
        floor: f64,
        min_w: f64,
        last_good_t: f64,
    },

    #[error("continuation failed after exhausting step halvings; last accepted t = {last_good_t}: {reason}")]
    ContinuationFailure { last_good_t: f64, reason: String },

    #[error("boundary data for u must vanish for this evaluation")]
    NonzeroBoundaryData,

    #[error("field is not strictly convex (min Hessian eigenvalue {min_eigenvalue:.3e})")]
    NotConvex { min_eigenvalue: f64 },

    #[error("empty test-function family")]
    EmptyFamily,

    #[error("no sign change of min w in the bracket [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
}
