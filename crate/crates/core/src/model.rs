//! Six-parameter gyroscope error model and the rotation-magnitude cost.
//!
//! Corrected rate on each axis is `g_l = k_l · (m_l + b_l)`, with positive
//! scale factors `k_l` and biases `b_l` in deg/s. Angles are degrees and rates
//! deg/s throughout; a rotation observation stores the time-integrated
//! measurement `Σ m_l·dt`, so the reference angle of a full turn is literally 360.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CalibrationError, Result};
use crate::Scalar;

/// Sensor axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scale factors and biases of the diagonal error model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationParams<T> {
    scale: [T; 3],
    bias: [T; 3],
}

impl<T: Scalar> CalibrationParams<T> {
    /// Rejects non-finite values and non-positive scale factors.
    pub fn new(scale: [T; 3], bias: [T; 3]) -> Result<Self> {
        for axis in Axis::ALL {
            let (k, b) = (scale[axis.index()], bias[axis.index()]);
            if !k.is_finite() || !b.is_finite() {
                return Err(CalibrationError::InvalidParams(format!(
                    "non-finite value on {axis} axis"
                )));
            }
            if k <= T::zero() {
                return Err(CalibrationError::InvalidParams(format!(
                    "scale factor k_{axis} = {k} must be positive"
                )));
            }
        }
        Ok(Self { scale, bias })
    }

    pub fn identity() -> Self {
        Self {
            scale: [T::one(); 3],
            bias: [T::zero(); 3],
        }
    }

    pub fn scale(&self) -> [T; 3] {
        self.scale
    }

    pub fn bias(&self) -> [T; 3] {
        self.bias
    }

    /// `[k_x, k_y, k_z, b_x, b_y, b_z]`
    pub fn to_vector(&self) -> [T; 6] {
        let [kx, ky, kz] = self.scale;
        let [bx, by, bz] = self.bias;
        [kx, ky, kz, bx, by, bz]
    }

    pub fn from_vector(v: [T; 6]) -> Result<Self> {
        Self::new([v[0], v[1], v[2]], [v[3], v[4], v[5]])
    }

    pub fn cast<U: Scalar>(&self) -> CalibrationParams<U> {
        CalibrationParams {
            scale: self.scale.map(cast_scalar),
            bias: self.bias.map(cast_scalar),
        }
    }
}

/// One triaxial rate measurement, deg/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RawSample<T>(pub [T; 3]);

impl<T: Scalar> RawSample<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self([x, y, z])
    }

    /// True when every component is finite and, if a full-scale range is given,
    /// strictly inside it.
    pub fn is_within(&self, full_scale: Option<T>) -> bool {
        self.0
            .iter()
            .all(|m| m.is_finite() && full_scale.is_none_or(|fs| m.abs() < fs))
    }
}

/// Corrected rate `k_l·(m_l + b_l)`.
pub fn apply_calibration<T: Scalar>(params: &CalibrationParams<T>, raw: &RawSample<T>) -> [T; 3] {
    let mut out = [T::zero(); 3];
    for i in 0..3 {
        out[i] = params.scale[i] * (raw.0[i] + params.bias[i]);
    }
    out
}

/// Raw measurement a sensor with `params` reports for `true_rate`: `g_l/k_l − b_l`.
pub fn inverse_calibration<T: Scalar>(
    params: &CalibrationParams<T>,
    true_rate: &[T; 3],
) -> RawSample<T> {
    let mut out = [T::zero(); 3];
    for i in 0..3 {
        out[i] = true_rate[i] / params.scale[i] - params.bias[i];
    }
    RawSample(out)
}

/// Summary of the stationary stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticObservation<T> {
    pub mean: [T; 3],
    /// Per-axis sample standard deviation; zero when only means were recorded.
    pub std: [T; 3],
    pub n_samples: usize,
}

impl<T: Scalar> StaticObservation<T> {
    pub fn new(mean: [T; 3], n_samples: usize) -> Result<Self> {
        Self::with_std(mean, [T::zero(); 3], n_samples)
    }

    pub fn with_std(mean: [T; 3], std: [T; 3], n_samples: usize) -> Result<Self> {
        if n_samples < 2 {
            return Err(CalibrationError::TooFewSamples {
                stage: "static",
                n: n_samples,
            });
        }
        if mean.iter().chain(&std).any(|v| !v.is_finite()) {
            return Err(CalibrationError::InvalidObservation(
                "static stage statistics must be finite".into(),
            ));
        }
        Ok(Self {
            mean,
            std,
            n_samples,
        })
    }

    pub fn from_samples(samples: &[RawSample<T>]) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(CalibrationError::TooFewSamples { stage: "static", n });
        }
        let count = T::count(n);
        let mut mean = [T::zero(); 3];
        for s in samples {
            for i in 0..3 {
                mean[i] = mean[i] + s.0[i];
            }
        }
        let mean = mean.map(|v| v / count);
        let mut var = [T::zero(); 3];
        for s in samples {
            for i in 0..3 {
                let d = s.0[i] - mean[i];
                var[i] = var[i] + d * d;
            }
        }
        let denom = T::count(n - 1);
        Self::with_std(mean, var.map(|v| (v / denom).sqrt()), n)
    }

    pub fn cast<U: Scalar>(&self) -> StaticObservation<U> {
        StaticObservation {
            mean: self.mean.map(cast_scalar),
            std: self.std.map(cast_scalar),
            n_samples: self.n_samples,
        }
    }
}

/// Integrated measurement of one manual rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationObservation<T> {
    /// `Σ_j m_{l,j}·dt` per axis, degrees.
    pub sum: [T; 3],
    /// Reference magnitude of the rotation, degrees.
    pub theta_total: T,
    pub n_samples: usize,
    /// Sample period, seconds.
    pub dt: T,
}

impl<T: Scalar> RotationObservation<T> {
    pub fn new(sum: [T; 3], theta_total: T, n_samples: usize, dt: T) -> Result<Self> {
        if n_samples < 2 {
            return Err(CalibrationError::TooFewSamples {
                stage: "rotation",
                n: n_samples,
            });
        }
        if !(theta_total > T::zero()) || !theta_total.is_finite() {
            return Err(CalibrationError::InvalidObservation(format!(
                "reference rotation angle must be positive, got {theta_total}"
            )));
        }
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(CalibrationError::InvalidObservation(format!(
                "sample period must be positive, got {dt}"
            )));
        }
        if sum.iter().any(|v| !v.is_finite()) {
            return Err(CalibrationError::InvalidObservation(
                "rotation sums must be finite".into(),
            ));
        }
        Ok(Self {
            sum,
            theta_total,
            n_samples,
            dt,
        })
    }

    /// Rectangle-rule integral of the samples.
    pub fn from_samples(samples: &[RawSample<T>], dt: T, theta_total: T) -> Result<Self> {
        let mut acc = [T::zero(); 3];
        for s in samples {
            for i in 0..3 {
                acc[i] = acc[i] + s.0[i];
            }
        }
        Self::new(acc.map(|v| v * dt), theta_total, samples.len(), dt)
    }

    /// Length of the rotation stage, `n_samples·dt` seconds.
    pub fn duration(&self) -> T {
        T::count(self.n_samples) * self.dt
    }

    /// Bias-corrected integral `S_l = Σ(m_l + b_l)·dt = sum_l + n·dt·b_l`.
    pub fn corrected_sum(&self, bias: &[T; 3]) -> [T; 3] {
        let duration = self.duration();
        let mut out = [T::zero(); 3];
        for i in 0..3 {
            out[i] = self.sum[i] + duration * bias[i];
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> RotationObservation<U> {
        RotationObservation {
            sum: self.sum.map(cast_scalar),
            theta_total: cast_scalar(self.theta_total),
            n_samples: self.n_samples,
            dt: cast_scalar(self.dt),
        }
    }
}

/// One complete protocol run: a stationary stage followed by the rotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Session<T> {
    pub static_stage: StaticObservation<T>,
    pub rotations: Vec<RotationObservation<T>>,
    pub sample_rate: T,
}

impl<T: Scalar> Session<T> {
    pub fn new(
        static_stage: StaticObservation<T>,
        rotations: Vec<RotationObservation<T>>,
        sample_rate: T,
    ) -> Result<Self> {
        if rotations.len() < 3 {
            return Err(CalibrationError::InvalidSession(format!(
                "at least 3 rotation stages are required, got {}",
                rotations.len()
            )));
        }
        if !(sample_rate > T::zero()) || !sample_rate.is_finite() {
            return Err(CalibrationError::InvalidSession(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        Ok(Self {
            static_stage,
            rotations,
            sample_rate,
        })
    }

    pub fn cast<U: Scalar>(&self) -> Session<U> {
        Session {
            static_stage: self.static_stage.cast(),
            rotations: self
                .rotations
                .iter()
                .map(RotationObservation::cast)
                .collect(),
            sample_rate: cast_scalar(self.sample_rate),
        }
    }
}

pub(crate) fn cast_scalar<T: Scalar, U: Scalar>(v: T) -> U {
    U::from(v).expect("scalar conversion")
}

/// Rotation-magnitude residual `Σ_l k_l²·S_l² − θ²` for raw parameter arrays.
pub(crate) fn residual_raw<T: Scalar>(
    scale: &[T; 3],
    bias: &[T; 3],
    rotation: &RotationObservation<T>,
) -> T {
    let s = rotation.corrected_sum(bias);
    let model = (0..3).fold(T::zero(), |acc, l| acc + scale[l] * scale[l] * s[l] * s[l]);
    model - rotation.theta_total * rotation.theta_total
}

pub(crate) fn squared_cost_raw<T: Scalar>(
    scale: &[T; 3],
    bias: &[T; 3],
    rotations: &[RotationObservation<T>],
) -> T {
    rotations.iter().fold(T::zero(), |acc, r| {
        let e = residual_raw(scale, bias, r);
        acc + e * e
    })
}

/// Per-rotation residuals, deg².
pub fn residuals<T: Scalar>(
    params: &CalibrationParams<T>,
    rotations: &[RotationObservation<T>],
) -> Vec<T> {
    rotations
        .iter()
        .map(|r| residual_raw(&params.scale, &params.bias, r))
        .collect()
}

/// Calibration cost: sum of absolute rotation-magnitude residuals.
pub fn cost<T: Scalar>(
    params: &CalibrationParams<T>,
    rotations: &[RotationObservation<T>],
) -> Result<T> {
    if rotations.is_empty() {
        return Err(CalibrationError::EmptyRotations);
    }
    Ok(residuals(params, rotations)
        .into_iter()
        .fold(T::zero(), |acc, e| acc + e.abs()))
}

/// Smooth variant of [`cost`]: sum of squared residuals. This is the objective
/// the iterative solver minimizes and the one the gradient checks differentiate.
pub fn squared_cost<T: Scalar>(
    params: &CalibrationParams<T>,
    rotations: &[RotationObservation<T>],
) -> Result<T> {
    if rotations.is_empty() {
        return Err(CalibrationError::EmptyRotations);
    }
    Ok(squared_cost_raw(&params.scale, &params.bias, rotations))
}
