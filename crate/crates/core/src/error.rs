use thiserror::Error;

/// Errors raised by the analytic solvers, the QP solvers and the Monte Carlo engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The unconstrained saddle point only exists for r < 1.
    #[error("r = {r} is at or beyond the r = 1 instability of the unconstrained problem")]
    PhaseBoundary { r: f64 },

    /// No saddle point with positive chemical potential exists.
    #[error("r = {r} is at or beyond the critical ratio r_c = {critical}; the saddle point has no positive-lambda solution")]
    CriticalPhase { r: f64, critical: f64 },

    #[error("saddle-point iteration did not converge after {iterations} iterations (residuals {residuals:?})")]
    NoConvergence {
        iterations: usize,
        residuals: [f64; 3],
    },

    #[error("matrix error: {0}")]
    Matrix(String),

    #[error("active-set solver did not converge after {iterations} iterations; last iterate {weights:?}")]
    Solver {
        iterations: usize,
        weights: Vec<f64>,
    },

    #[error("invalid input: {0}")]
    Spec(String),

    #[error("trial failed at r = {r} (T = {t}, trial {trial}): {source}")]
    Trial {
        r: f64,
        t: usize,
        trial: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
