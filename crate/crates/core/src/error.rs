use thiserror::Error;

/// Errors raised by the beamforming library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid steering vector: norm {norm} is not 1")]
    InvalidSteering { norm: f64 },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate snapshot: blocked energy {0} is not positive")]
    DegenerateSnapshot(f64),
    #[error("undefined projection: zero output modulus below the lower strip")]
    UndefinedProjection,
    #[error("covariance matrix is not invertible")]
    NonInvertibleCovariance,
    #[error("degenerate noise: residual noise standard deviation is zero")]
    DegenerateNoise,
    #[error("undefined step-size moment: mean bound is zero")]
    UndefinedMoment,
    #[error("prediction out of domain: excess-MSE denominator {0} is not positive")]
    PredictionOutOfDomain(f64),
    #[error("undefined stability bound: all eigenvalues are zero")]
    UndefinedBound,
    #[error("enumeration limit exceeded: {0} gains (max 20)")]
    EnumerationLimit(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
