use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("curve is not strictly decreasing: derivative {derivative} at t = {t}")]
    NotMonotone { t: f64, derivative: f64 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("quadrature failed to reach tolerance {tolerance:e} (error estimate {estimate:e})")]
    QuadratureFailure { tolerance: f64, estimate: f64 },

    #[error("kinetic energy vanishes inside ({lo}, {hi}); the particle turns before reaching the target")]
    TurningPoint { lo: f64, hi: f64 },

    #[error("zero initial velocity at x = {x}; use the integrated-by-parts derivative")]
    SingularBoundary { x: f64 },

    #[error("hypothesis `{hypothesis}` violated at {witness}")]
    HypothesisViolated { hypothesis: String, witness: String },

    #[error("particle starting at {x0} never reaches boundary {boundary}")]
    NeverReaches { x0: f64, boundary: f64 },

    #[error("integrator step size underflow at t = {t}")]
    StepFailure { t: f64 },

    #[error("trajectory left the overflow guard at t = {t}")]
    BlowUp { t: f64 },

    #[error("radius fell below the origin guard at t = {t}")]
    OriginApproach { t: f64 },

    #[error("position {y} lies outside the image [{lo}, {hi}] at t = {t}")]
    OutOfImage { t: f64, y: f64, lo: f64, hi: f64 },

    #[error("flow is not regular at t = {t}: {reason}")]
    NotRegular { t: f64, reason: String },

    #[error("criteria disagree: {0}")]
    InternalInconsistency(String),

    #[error("scenario cannot be serialized: {0}")]
    NotSerializable(String),

    #[error("operation requires a finite horizon")]
    InfiniteHorizon,

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
