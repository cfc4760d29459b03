use thiserror::Error;

/// Errors raised by the engine model and its optimizers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The bath pair cannot drive an engine (cold side is not colder).
    #[error("not an engine: hot effective temperature {hot} must exceed cold effective temperature {cold}")]
    NotAnEngine { hot: f64, cold: f64 },

    /// Equal gap endpoints leave no entropy to move between the baths.
    #[error("degenerate cycle: delta_a = delta_b = {0} gives zero entropy change")]
    DegenerateCycle(f64),

    /// A (p, dp/dt) pair that no finite gap can produce.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// The branch formula hits its pole at K = p.
    #[error("singular branch: K = p = {0}")]
    Singular(f64),

    /// Requested duration is shorter than the fastest admissible branch.
    #[error("infeasible duration {target}: shortest admissible duration is {minimum}")]
    InfeasibleDuration { target: f64, minimum: f64 },

    /// Adaptive quadrature could not meet its tolerance.
    #[error("quadrature did not converge on [{a}, {b}]: estimate {estimate}, error {error} after {intervals} intervals")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    /// Generic numerical failure with a diagnostic message.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The power optimizer did not converge; the best iterate is attached.
    #[error("optimizer did not converge: {message} (best K_H = {best_k_hot}, K_C = {best_k_cold}, reduced power = {best_value})")]
    NotConverged {
        message: String,
        best_k_hot: f64,
        best_k_cold: f64,
        best_value: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
