use thiserror::Error;

/// Errors raised by problem construction, solvers and the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("invalid Slater point: min_j(-g_j(x_bar)) = {min_slack} must be positive")]
    InvalidSlaterPoint { min_slack: f64 },

    #[error(
        "Hessian is not diagonally dominant (margin {margin} at row {row}); \
         a primal-regularized variant would be required and is not supported"
    )]
    NotDiagonallyDominant { row: usize, margin: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stepsize condition violated: {0}")]
    Stepsize(String),

    #[error("did not converge: {0}")]
    NotConverged(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("contraction certificate failed: {0}")]
    Certificate(String),

    #[error(
        "constraint tightening infeasible at the Slater point; \
         delta must be below {max_delta:e}"
    )]
    TighteningInfeasible { max_delta: f64 },

    #[error(
        "eps2 = {eps2:e} is unreachable: smallest asynchrony penalty C3 = {frontier:e} \
         at delta = {delta_at_frontier:e}"
    )]
    CorollaryInfeasible {
        eps2: f64,
        frontier: f64,
        delta_at_frontier: f64,
    },

    #[error("constraint sparsity is not block-separable: {0}")]
    NotBlockSeparable(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
