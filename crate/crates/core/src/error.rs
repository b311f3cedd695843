use thiserror::Error;

/// Errors raised by the solvers and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero pivot in tridiagonal solve at row {row}")]
    ZeroPivot { row: usize },

    #[error("negative overshoot {value:e} at node {node} (time step too large)")]
    NegativeOvershoot { node: usize, value: f64 },

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("propagated profile lost positivity at node {node} (value {value:e})")]
    LostPositivity { node: usize, value: f64 },

    #[error("window spread {spread:.3e} exceeds tolerance {tolerance:.3e}")]
    NotConverged { spread: f64, tolerance: f64 },

    #[error(
        "pullback not converged: last depth change {change:.3e} above tolerance {tolerance:.3e}"
    )]
    PullbackNotConverged { change: f64, tolerance: f64 },

    #[error("bracket does not straddle a sign change: {0}")]
    BadBracket(String),

    #[error("front moved backwards: {side} slope gives velocity {velocity:e}")]
    FrontReversed { side: &'static str, velocity: f64 },

    #[error("part metric undefined: {0}")]
    NotPositive(String),

    #[error("negative principal exponent: {0}")]
    NegativeExponent(String),

    #[error("verdict undetermined: {0}")]
    Undetermined(String),

    #[error("monotonicity violated: {0}")]
    Monotonicity(String),

    #[error("{source} (after {steps} steps, t = {time})")]
    Partial {
        source: Box<Error>,
        steps: usize,
        time: f64,
    },
}

impl Error {
    /// Strips the partial-run wrapper.
    pub fn root(&self) -> &Error {
        match self {
            Error::Partial { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
