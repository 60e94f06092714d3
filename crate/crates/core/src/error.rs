use thiserror::Error;

/// Errors raised by the solvers, the inversion routines and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("missing boundary data for the {0} boundary condition")]
    MissingBoundaryData(&'static str),

    #[error("linear solver failure: {0}")]
    LinearSolver(String),

    #[error("degenerate search direction at iteration {iteration}: zero forward sensitivity")]
    DegenerateDirection { iteration: usize },

    #[error(
        "fixed-point iteration diverged after {iterations} iterations (increments {increments:?})"
    )]
    Divergence {
        iterations: usize,
        increments: Vec<f64>,
    },

    #[error("unknown example `{0}`")]
    UnknownExample(String),

    #[error("inverse crime: data mesh refinement is 1 and no override was given")]
    InverseCrime,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: format!("{what} of length {expected}"),
            got: format!("length {got}"),
        })
    }
}
