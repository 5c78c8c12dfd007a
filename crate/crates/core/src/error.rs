use thiserror::Error;

/// Errors raised by the graph, decay and solver modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A decay recursion denominator became non-positive, or the smallness
    /// ratio exceeded its threshold in strict mode.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("Riccati blow-up at t = {time:.6}: block norm {norm:.3e} exceeds {limit:.1e}")]
    BlowUp { time: f64, norm: f64, limit: f64 },

    #[error("covariance lost positive semidefiniteness at t = {time:.6} (min eigenvalue {min_eig:.3e})")]
    Covariance { time: f64, min_eig: f64 },

    #[error("step refinement check failed: relative change {change:.3e} exceeds {limit:.1e}")]
    Refinement { change: f64, limit: f64 },

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
}

pub type Result<T> = std::result::Result<T, GameError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(GameError::InvalidInput(msg.into()))
}
