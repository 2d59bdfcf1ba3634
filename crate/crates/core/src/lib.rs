//! Field calibration of triaxial gyroscopes without reference equipment.
//!
//! The sensor is held still for a few seconds, then turned by hand through one
//! full revolution about each of its three axes. The stationary stage fixes the
//! biases; the known 360° magnitude of each turn fixes the scale factors
//! through a three-unknown linear least-squares problem.
//!
//! The numeric modules are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root name the `f64` instantiations used by the
//! simulator and the command-line tool.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod doe;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod model;
pub mod nonlinear;
pub mod observability;
mod scalar;
pub mod session_log;
pub mod simulator;
pub mod verify;

pub use error::{CalibrationError, Result};
pub use estimator::{calibrate, calibrate_with, CalibrateOptions, Calibration, LinearSystem};
pub use model::{
    apply_calibration, cost, inverse_calibration, squared_cost, Axis, CalibrationParams, RawSample,
    RotationObservation, Session, StaticObservation,
};
pub use nonlinear::{calibrate_nonlinear, NonlinearMode, NonlinearOptions, NonlinearSolution};
pub use scalar::Scalar;

pub type Params64 = CalibrationParams<f64>;
pub type Params32 = CalibrationParams<f32>;
pub type Session64 = Session<f64>;
pub type Session32 = Session<f32>;
pub type StaticObservation64 = StaticObservation<f64>;
pub type RotationObservation64 = RotationObservation<f64>;
pub type RawSample64 = RawSample<f64>;
pub type Design64 = doe::Design<f64>;
pub type LinearSystem64 = LinearSystem<f64>;
