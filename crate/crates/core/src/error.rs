use thiserror::Error;

/// Errors raised by the solver, the norm computations and the oracles.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("value {requested} is beyond the cumulative range; maximum is {max}")]
    Range { requested: f64, max: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("grid mismatch between fields")]
    GridMismatch,

    #[error("index {index} outside range [{min}, {max}]")]
    OutOfRange { index: i32, min: i32, max: i32 },

    #[error("degenerate kernel: accumulated coefficient matrix is singular at t = {0}")]
    DegenerateKernel(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("matrix square root failed: eigenvalue {0:.3e} is below the clamping threshold")]
    MatrixSqrt(f64),

    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
