//! Closed-form calibration from one stationary stage and three or more rotations.
//!
//! Biases come straight from the stationary means. With biases known, the
//! squared rotation magnitude is linear in the squared scale factors:
//!
//! ```text
//! θ_i² = k_x²·S_{x,i}² + k_y²·S_{y,i}² + k_z²·S_{z,i}²
//! ```
//!
//! so `β = (k_x², k_y², k_z²)` is an ordinary least-squares fit with regressor
//! rows `(S_{x,i}², S_{y,i}², S_{z,i}²)`.

use crate::error::{CalibrationError, Result};
use crate::linalg::Svd;
use crate::model::{Axis, CalibrationParams, RotationObservation, Session, StaticObservation};
use crate::Scalar;

/// Regression problem `Y = X·β` for the squared scale factors.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem<T> {
    /// One row per rotation: squared bias-corrected integrals, deg².
    pub x: Vec<[T; 3]>,
    /// Squared reference angles, deg².
    pub y: Vec<T>,
}

impl<T: Scalar> LinearSystem<T> {
    /// Assembles the regression from any number of rotations.
    pub fn from_rotations(rotations: &[RotationObservation<T>], bias: &[T; 3]) -> Result<Self> {
        if rotations.is_empty() {
            return Err(CalibrationError::EmptyRotations);
        }
        let x = rotations
            .iter()
            .map(|r| r.corrected_sum(bias).map(|s| s * s))
            .collect();
        let y = rotations
            .iter()
            .map(|r| r.theta_total * r.theta_total)
            .collect();
        Ok(Self { x, y })
    }

    pub fn condition_number(&self) -> T {
        Svd::new(&self.x).condition_number()
    }
}

/// Options for [`calibrate_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrateOptions<T> {
    /// Largest accepted condition number of the regressor matrix.
    pub max_condition: T,
    /// A rotation is near-static when every axis integrates to less than this
    /// fraction of its reference angle.
    pub min_rotation_fraction: T,
    /// Expected per-sample noise of the sensor at rest, deg/s. When set, the
    /// stationary stage is rejected if any axis has a standard deviation above
    /// `static_noise_multiplier` times this value.
    pub static_noise: Option<T>,
    pub static_noise_multiplier: T,
}

impl<T: Scalar> Default for CalibrateOptions<T> {
    fn default() -> Self {
        Self {
            max_condition: T::lit(1e8),
            min_rotation_fraction: T::lit(0.25),
            static_noise: None,
            static_noise_multiplier: T::lit(5.0),
        }
    }
}

/// Estimated parameters plus what the estimate was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration<T> {
    pub params: CalibrationParams<T>,
    pub squared_scale: [T; 3],
    pub condition_number: T,
    pub system: LinearSystem<T>,
}

/// Biases that zero the stationary means: `b_l = −mean_l`.
pub fn estimate_bias<T: Scalar>(static_stage: &StaticObservation<T>) -> Result<[T; 3]> {
    if static_stage.n_samples < 2 {
        return Err(CalibrationError::TooFewSamples {
            stage: "static",
            n: static_stage.n_samples,
        });
    }
    Ok(static_stage.mean.map(|m| -m))
}

/// Regression for exactly three rotations, the minimal protocol.
pub fn build_linear_system<T: Scalar>(
    rotations: &[RotationObservation<T>],
    bias: &[T; 3],
) -> Result<LinearSystem<T>> {
    if rotations.len() != 3 {
        return Err(CalibrationError::WrongRotationCount {
            expected: 3,
            got: rotations.len(),
        });
    }
    LinearSystem::from_rotations(rotations, bias)
}

/// Solves for `β` and returns `k_l = √β_l`.
pub fn solve_scale<T: Scalar>(system: &LinearSystem<T>) -> Result<[T; 3]> {
    solve_scale_checked(system, T::lit(1e8)).map(|(k, _, _)| k)
}

fn solve_scale_checked<T: Scalar>(
    system: &LinearSystem<T>,
    max_condition: T,
) -> Result<([T; 3], [T; 3], T)> {
    if system.x.len() < 3 {
        return Err(CalibrationError::WrongRotationCount {
            expected: 3,
            got: system.x.len(),
        });
    }
    let svd = Svd::new(&system.x);
    let condition = svd.condition_number();
    if condition.is_infinite() {
        return Err(CalibrationError::Singular);
    }
    if !(condition <= max_condition) {
        return Err(CalibrationError::IllConditioned {
            condition: condition.to_f64().unwrap_or(f64::INFINITY),
            limit: max_condition.to_f64().unwrap_or(f64::INFINITY),
        });
    }
    let beta = svd.solve(&system.y).ok_or(CalibrationError::Singular)?;
    for axis in Axis::ALL {
        let b = beta[axis.index()];
        if !(b > T::zero()) {
            return Err(CalibrationError::NegativeScale {
                axis,
                beta: b.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    Ok((beta.map(|b| b.sqrt()), beta, condition))
}

/// Full closed-form pipeline with default options.
pub fn calibrate<T: Scalar>(session: &Session<T>) -> Result<CalibrationParams<T>> {
    calibrate_with(session, &CalibrateOptions::default()).map(|c| c.params)
}

pub fn calibrate_with<T: Scalar>(
    session: &Session<T>,
    options: &CalibrateOptions<T>,
) -> Result<Calibration<T>> {
    if session.rotations.len() < 3 {
        return Err(CalibrationError::WrongRotationCount {
            expected: 3,
            got: session.rotations.len(),
        });
    }
    if let Some(noise) = options.static_noise {
        let limit = noise * options.static_noise_multiplier;
        for axis in Axis::ALL {
            let std = session.static_stage.std[axis.index()];
            if std > limit {
                return Err(CalibrationError::StaticMotion {
                    axis,
                    std: std.to_f64().unwrap_or(f64::NAN),
                    limit: limit.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    let bias = estimate_bias(&session.static_stage)?;
    for (index, rotation) in session.rotations.iter().enumerate() {
        let threshold = options.min_rotation_fraction * rotation.theta_total;
        if rotation
            .corrected_sum(&bias)
            .iter()
            .all(|s| s.abs() < threshold)
        {
            return Err(CalibrationError::NearStaticRotation {
                index,
                threshold: threshold.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let system = LinearSystem::from_rotations(&session.rotations, &bias)?;
    let (scale, squared_scale, condition_number) =
        solve_scale_checked(&system, options.max_condition)?;
    Ok(Calibration {
        params: CalibrationParams::new(scale, bias)?,
        squared_scale,
        condition_number,
        system,
    })
}
