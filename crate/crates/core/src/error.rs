use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("variable x{index} out of range for dimension {dimension}")]
    VariableOutOfRange { index: usize, dimension: usize },
    #[error("bad exponent at offset {offset}: {message}")]
    BadExponent { offset: usize, message: String },
    #[error("division by zero")]
    DivisionByZero,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("scene failed validation: {0}")]
    ValidationFailed(String),
    #[error("point {coords:?} is not on the boundary shell (z = {z:e})")]
    NotOnBoundary { coords: Vec<f64>, z: f64 },
    #[error("degenerate contact at {coords:?}: Lie derivatives vanish through order {order}")]
    DegenerateContact { coords: Vec<f64>, order: usize },
    #[error("seed {coords:?} lies outside the domain (z = {z:e})")]
    SeedOutside { coords: Vec<f64>, z: f64 },
    #[error("trajectory left the bounding box at {coords:?} while inside the domain")]
    EscapedBbox { coords: Vec<f64> },
    #[error("trajectory from {seed:?} exceeded the arc-length cap {cap}")]
    NonTraversing { seed: Vec<f64>, cap: f64 },
    #[error("boundary curve extraction failed: {0}")]
    CurveExtraction(String),
    #[error("inconsistent quotient: {0}")]
    InconsistentQuotient(String),
    #[error("no trajectory class matches the trajectory through {coords:?}")]
    UnmatchedClass { coords: Vec<f64> },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("order violation: {0}")]
    OrderViolation(String),
    #[error("local model: {0}")]
    LocalModel(String),
    #[error("reconstruction failed: {0}")]
    Reconstruction(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
