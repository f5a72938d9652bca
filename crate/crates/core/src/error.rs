use thiserror::Error;

/// Errors raised by the localization library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("sensor {index} ({role}) is within 1e-12 m of the reference point")]
    DegenerateGeometry { role: &'static str, index: usize },

    #[error("geometry is singular: det = {det:e}, scale = {scale:e}")]
    SingularGeometry { det: f64, scale: f64 },

    #[error("delay design matrix is rank deficient")]
    RankDeficient,

    #[error("Fisher information is singular or ill-conditioned: {0}")]
    SingularFim(String),

    #[error("waveform has zero energy")]
    ZeroEnergy,

    #[error("delay {delay:e} s is outside [{low:e}, {high:e})")]
    DelayOutOfRange { delay: f64, low: f64, high: f64 },

    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("need at least 3 sensors in a symmetric subset, got {0}")]
    TooFewSensors(usize),

    #[error("best placement trace is not finite")]
    DegenerateOptimum,

    #[error("matched-filter peak for path {path} is on the window boundary")]
    PeakNotFound { path: usize },

    #[error("likelihood maximum lies on the search region boundary")]
    BoundaryMaximum,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("numerical cross-check failed: {0}")]
    NumericalMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
