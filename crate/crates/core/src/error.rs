use thiserror::Error;

/// Errors produced by the gaplab numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GapError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("point {point:?} lies outside the closed domain (signed distance {distance:e})")]
    OutOfDomain { point: [f64; 2], distance: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("cannot construct auxiliary data: {0}")]
    CannotConstruct(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    SolverNonConvergence { iterations: usize, residual: f64 },

    #[error("corrupt eigenfunction: {0}")]
    CorruptEigenfunction(String),

    #[error("endpoint extension failed: {0}")]
    EndpointExtension(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("degenerate pair: |y - x| = {separation:e} is below {threshold:e}")]
    DegeneratePair { separation: f64, threshold: f64 },

    #[error("finite-difference stencil leaves the domain at {0:?}")]
    StencilOutOfDomain(Vec<f64>),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, GapError>;

impl From<std::io::Error> for GapError {
    fn from(e: std::io::Error) -> Self {
        GapError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for GapError {
    fn from(e: serde_json::Error) -> Self {
        GapError::Config(e.to_string())
    }
}
