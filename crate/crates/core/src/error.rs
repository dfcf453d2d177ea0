use thiserror::Error;

/// Errors raised by the geometric and dynamical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),

    #[error("consecutive vertices {0} and {1} coincide")]
    CoincidentVertices(usize, usize),

    #[error("tangent vector has {got} components, polygon has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },

    #[error("degenerate polygon: vertices around index {0} are collinear")]
    Degenerate(usize),

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("point ({0}, {1}) is not strictly outside the table")]
    NotExterior(f64, f64),

    #[error("outer map undefined: ({0}, {1}) lies on the line of a straight boundary piece")]
    SingularLine(f64, f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("path degenerated at t = {t}")]
    PathDegenerate { t: f64 },

    #[error("no convergence after {iterations} iterations; residual history {history:?}")]
    NoConvergence { iterations: usize, history: Vec<f64> },

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("support-function fit residual {residual:e} exceeds {tolerance:e}")]
    FitFailure { residual: f64, tolerance: f64 },

    #[error("geometric degeneracy: {0}")]
    GeometricDegeneracy(String),
}

pub type Result<T> = std::result::Result<T, Error>;
