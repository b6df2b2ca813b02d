use thiserror::Error;

/// Everything that can go wrong while configuring or running a solve.
///
/// Variants that carry numbers keep them machine-readable so callers can
/// format defect reports without re-parsing prose.
#[derive(Debug, Error)]
pub enum VortexError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("field evaluated at a singular marked point ({x}, {y})")]
    SingularPoint { x: f64, y: f64 },

    #[error("marked point {index} has a*n = {product}; an_j < 1 violated")]
    HeavyPole { index: usize, product: f64 },

    #[error("flux target {target} is not reachable; available mass {available}")]
    TargetUnreachable { target: f64, available: f64 },

    #[error("branch refused: {0}")]
    Refused(String),

    #[error("iteration failed to converge after {iterations} steps (residual {residual})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("bracket violation: {0}")]
    BracketViolation(String),

    #[error("certificate check failed: {0}")]
    Certification(String),

    #[error("fit window too short: {0}")]
    WindowTooShort(String),

    #[error("least-squares system ill conditioned: {0}")]
    IllConditioned(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, VortexError>;
