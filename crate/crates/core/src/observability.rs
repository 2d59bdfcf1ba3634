//! Sensitivity of the calibration objective to each parameter.
//!
//! The differentiated objective is the smooth one, `J = Σ_i r_i²` with
//! `r_i = Σ_l k_l²·S_{l,i}² − θ_i²`, which gives
//!
//! ```text
//! ∂J/∂k_l = Σ_i 2·r_i · 2·k_l·S_{l,i}²
//! ∂J/∂b_l = Σ_i 2·r_i · 2·k_l²·S_{l,i}·T_i
//! ```
//!
//! where `T_i` is the duration of rotation `i`. The `*_model_term` variants
//! differentiate the model term `Σ_i k_l²·S_{l,i}²` alone, which is the form
//! usually quoted when arguing about observability: it grows with the rotation
//! magnitude for the scales and stays non-zero at rest for the biases.

use crate::error::{CalibrationError, Result};
use crate::model::{residual_raw, squared_cost_raw, CalibrationParams, RotationObservation};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityReport<T> {
    pub d_scale: [T; 3],
    pub d_bias: [T; 3],
    pub nominal: CalibrationParams<T>,
}

fn non_empty<T>(rotations: &[RotationObservation<T>]) -> Result<()> {
    if rotations.is_empty() {
        Err(CalibrationError::EmptyRotations)
    } else {
        Ok(())
    }
}

/// `∂J/∂k_l` of the squared-residual objective.
pub fn grad_scale<T: Scalar>(
    nominal: &CalibrationParams<T>,
    rotations: &[RotationObservation<T>],
) -> Result<[T; 3]> {
    non_empty(rotations)?;
    let (k, b) = (nominal.scale(), nominal.bias());
    let four = T::lit(4.0);
    let mut g = [T::zero(); 3];
    for rot in rotations {
        let r = residual_raw(&k, &b, rot);
        let s = rot.corrected_sum(&b);
        for l in 0..3 {
            g[l] = g[l] + four * r * k[l] * s[l] * s[l];
        }
    }
    Ok(g)
}

/// `∂J/∂b_l` of the squared-residual objective.
pub fn grad_bias<T: Scalar>(
    nominal: &CalibrationParams<T>,
    rotations: &[RotationObservation<T>],
) -> Result<[T; 3]> {
    non_empty(rotations)?;
    let (k, b) = (nominal.scale(), nominal.bias());
    let four = T::lit(4.0);
    let mut g = [T::zero(); 3];
    for rot in rotations {
        let r = residual_raw(&k, &b, rot);
        let s = rot.corrected_sum(&b);
        let duration = rot.duration();
        for l in 0..3 {
            g[l] = g[l] + four * r * k[l] * k[l] * s[l] * duration;
        }
    }
    Ok(g)
}

/// `Σ_i (2k_l·M_{l,i}² + 2k_l·T_i²·b_l² + 4k_l·T_i·b_l·M_{l,i})`, with `M` the
/// raw integral. Equal to `Σ_i 2k_l·S_{l,i}²`.
pub fn grad_scale_model_term<T: Scalar>(
    nominal: &CalibrationParams<T>,
    rotations: &[RotationObservation<T>],
) -> Result<[T; 3]> {
    non_empty(rotations)?;
    let (k, b) = (nominal.scale(), nominal.bias());
    let (two, four) = (T::lit(2.0), T::lit(4.0));
    let mut g = [T::zero(); 3];
    for rot in rotations {
        let t = rot.duration();
        for l in 0..3 {
            let m = rot.sum[l];
            g[l] = g[l]
                + two * k[l] * m * m
                + two * k[l] * t * t * b[l] * b[l]
                + four * k[l] * t * b[l] * m;
        }
    }
    Ok(g)
}

/// `Σ_i (2b_l·T_i²·k_l² + 2T_i·k_l²·M_{l,i})`. Equal to `Σ_i 2k_l²·T_i·S_{l,i}`.
pub fn grad_bias_model_term<T: Scalar>(
    nominal: &CalibrationParams<T>,
    rotations: &[RotationObservation<T>],
) -> Result<[T; 3]> {
    non_empty(rotations)?;
    let (k, b) = (nominal.scale(), nominal.bias());
    let two = T::lit(2.0);
    let mut g = [T::zero(); 3];
    for rot in rotations {
        let t = rot.duration();
        for l in 0..3 {
            let k2 = k[l] * k[l];
            g[l] = g[l] + two * b[l] * t * t * k2 + two * t * k2 * rot.sum[l];
        }
    }
    Ok(g)
}

pub fn sensitivity<T: Scalar>(
    nominal: &CalibrationParams<T>,
    rotations: &[RotationObservation<T>],
) -> Result<SensitivityReport<T>> {
    Ok(SensitivityReport {
        d_scale: grad_scale(nominal, rotations)?,
        d_bias: grad_bias(nominal, rotations)?,
        nominal: *nominal,
    })
}

/// Central differences of the squared-residual objective in
/// `[k_x, k_y, k_z, b_x, b_y, b_z]`.
pub fn finite_difference_grad<T: Scalar>(
    nominal: &CalibrationParams<T>,
    rotations: &[RotationObservation<T>],
    h: T,
) -> Result<[T; 6]> {
    if !(h > T::zero()) {
        return Err(CalibrationError::InvalidArgument(format!(
            "step must be positive, got {h}"
        )));
    }
    let base = nominal.to_vector();
    let mut out = [T::zero(); 6];
    let objective =
        |v: &[T; 6]| squared_cost_raw(&[v[0], v[1], v[2]], &[v[3], v[4], v[5]], rotations);
    for (i, g) in out.iter_mut().enumerate() {
        let (mut plus, mut minus) = (base, base);
        plus[i] = plus[i] + h;
        minus[i] = minus[i] - h;
        *g = (objective(&plus) - objective(&minus)) / (T::lit(2.0) * h);
    }
    Ok(out)
}

/// Analytical gradient as a 6-vector in the same order as [`finite_difference_grad`].
pub fn analytic_grad<T: Scalar>(
    nominal: &CalibrationParams<T>,
    rotations: &[RotationObservation<T>],
) -> Result<[T; 6]> {
    let k = grad_scale(nominal, rotations)?;
    let b = grad_bias(nominal, rotations)?;
    Ok([k[0], k[1], k[2], b[0], b[1], b[2]])
}
