use thiserror::Error;

/// Errors produced by mesh construction, assembly and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("index {index} out of bounds (len {len})")]
    OutOfBounds { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operation requires a continuous scalar space")]
    NotContinuous,

    #[error("Cordes condition violated at ({x}, {y}): |A|_F^2 / tr(A)^2 = {ratio}")]
    CordesViolated { x: f64, y: f64, ratio: f64 },

    #[error("coefficient matrix not positive definite at ({x}, {y}): min eigenvalue {eigenvalue}")]
    NotElliptic { x: f64, y: f64, eigenvalue: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("penalty eta1 must be positive for the piecewise Hessian scheme")]
    ZeroPenalty,

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
