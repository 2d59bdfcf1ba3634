//! Scaled prediction variance and the G-optimality check for rotation designs.
//!
//! Design points live in the normalized regressor space `(x₁, x₂, x₃)`; the
//! canonical protocol of one rotation about each sensor axis is the identity
//! design. The physical magnitude of a point (360² deg²) is a common scale
//! factor and drops out of the comparison.

use crate::error::{CalibrationError, Result};
use crate::linalg::{dot, gram, solve, symmetric_eigenvalues};
use crate::Scalar;

/// Number of unknowns in the linearized scale model.
pub const PARAMETER_COUNT: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Design<T> {
    rows: Vec<[T; 3]>,
}

impl<T: Scalar> Design<T> {
    pub fn new(rows: Vec<[T; 3]>) -> Result<Self> {
        if rows.len() < PARAMETER_COUNT {
            return Err(CalibrationError::InvalidArgument(format!(
                "a design needs at least {PARAMETER_COUNT} points, got {}",
                rows.len()
            )));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CalibrationError::InvalidArgument(
                "design points must be finite".into(),
            ));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[[T; 3]] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// `XᵀX`
    pub fn moment_matrix(&self) -> [[T; 3]; 3] {
        gram(&self.rows)
    }
}

/// One rotation about each sensor axis.
pub fn canonical_design<T: Scalar>() -> Design<T> {
    let (o, z) = (T::one(), T::zero());
    Design {
        rows: vec![[o, z, z], [z, o, z], [z, z, o]],
    }
}

/// `n · f(x)ᵀ (XᵀX)⁻¹ f(x)` with `f(x) = x`.
pub fn spv<T: Scalar>(design: &Design<T>, point: &[T; 3]) -> Result<T> {
    let w = solve(design.moment_matrix(), *point).ok_or(CalibrationError::SingularDesign)?;
    Ok(T::count(design.n()) * dot(point, &w))
}

/// Exact maximum of [`spv`] over the unit sphere: `n · λ_max((XᵀX)⁻¹) = n / λ_min(XᵀX)`.
pub fn max_spv_sphere<T: Scalar>(design: &Design<T>) -> Result<T> {
    let moment = design.moment_matrix();
    let eig = symmetric_eigenvalues(moment);
    let (min, max) = (eig[0], eig[PARAMETER_COUNT - 1]);
    if !(min > max * T::epsilon() * T::lit(16.0)) {
        return Err(CalibrationError::SingularDesign);
    }
    Ok(T::count(design.n()) / min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GOptimalityReport<T> {
    pub max_spv: T,
    pub parameters: usize,
    pub optimal: bool,
}

/// A design is G-optimal on the sphere when its maximum SPV equals the
/// parameter count. Singular designs are reported as not optimal.
pub fn is_g_optimal<T: Scalar>(design: &Design<T>, tolerance: T) -> GOptimalityReport<T> {
    let p = T::count(PARAMETER_COUNT);
    match max_spv_sphere(design) {
        Ok(max_spv) => GOptimalityReport {
            max_spv,
            parameters: PARAMETER_COUNT,
            optimal: (max_spv - p).abs() <= tolerance,
        },
        Err(_) => GOptimalityReport {
            max_spv: T::infinity(),
            parameters: PARAMETER_COUNT,
            optimal: false,
        },
    }
}
