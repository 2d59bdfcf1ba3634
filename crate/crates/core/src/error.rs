use thiserror::Error;

use crate::model::Axis;

/// Failures of the calibration pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("invalid calibration parameters: {0}")]
    InvalidParams(String),
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error("invalid session: {0}")]
    InvalidSession(String),
    #[error("no rotation observations supplied")]
    EmptyRotations,
    #[error("expected {expected} rotation observations, got {got}")]
    WrongRotationCount { expected: usize, got: usize },
    #[error("{stage} stage has {n} samples, at least 2 are required")]
    TooFewSamples { stage: &'static str, n: usize },
    #[error("rotation {index} is near-static: no axis accumulated at least {threshold} degrees")]
    NearStaticRotation { index: usize, threshold: f64 },
    #[error(
        "static stage shows motion on {axis} axis: std {std} deg/s exceeds limit {limit} deg/s"
    )]
    StaticMotion { axis: Axis, std: f64, limit: f64 },
    #[error("regressor matrix is singular (rotations do not span all three axes)")]
    Singular,
    #[error(
        "regressor matrix is ill-conditioned: condition number {condition:e} exceeds {limit:e}"
    )]
    IllConditioned { condition: f64, limit: f64 },
    #[error(
        "squared scale factor for {axis} axis is negative ({beta}); data contradicts the model"
    )]
    NegativeScale { axis: Axis, beta: f64 },
    #[error(
        "nonlinear solver did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },
    #[error(
        "nonlinear solver drove the {axis} scale factor non-positive at iteration {iteration}"
    )]
    NonPositiveScale { axis: Axis, iteration: usize },
    #[error("design moment matrix is singular")]
    SingularDesign,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = CalibrationError> = std::result::Result<T, E>;
