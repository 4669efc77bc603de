use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("liquidation {gamma} outside the asset domain [0, {max}]")]
    Domain { gamma: f64, max: f64 },

    #[error("inverse demand family `{0}` is not differentiable")]
    NonDifferentiable(&'static str),

    #[error("invalid configuration at {path}: {reason}")]
    Config { path: String, reason: String },

    #[error("bank `{bank}` holds no risk-weighted assets; capital ratio is undefined")]
    Unregulated { bank: String },

    #[error("inner liquidation solver did not converge for bank {bank} after {iterations} iterations (step {step:.3e}, constraint residual {constraint:.3e})")]
    InnerSolver {
        bank: usize,
        iterations: usize,
        step: f64,
        constraint: f64,
    },

    #[error("{solver} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        /// Tail of the residual history, most recent last.
        trace: Vec<f64>,
    },

    #[error("liquidation strategy is not monotone: iterate {iteration} moved against the {direction} direction by {violation:.3e}")]
    NotMonotone {
        iteration: usize,
        direction: &'static str,
        violation: f64,
    },

    #[error("uniqueness condition violated: I - W is numerically singular (condition number {condition:.3e})")]
    SingularSensitivity { condition: f64 },

    #[error("class configuration changes under a perturbation of size {step:.3e}; retry with a smaller step")]
    KinkDetected { step: f64 },

    #[error("calibration failed for {context}: {reason}")]
    Calibration { context: String, reason: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("failed to read {path}: {reason}")]
    Io { path: String, reason: String },
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
