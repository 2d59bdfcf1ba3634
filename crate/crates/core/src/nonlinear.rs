//! Iterative reference solver for the nonlinear calibration problem.
//!
//! Gauss-Newton with step halving on the squared rotation-magnitude residuals.
//! In [`NonlinearMode::Full`] all six parameters are free and the stationary
//! stage contributes three residuals `w·k_l·(mean_l + b_l)`, where `w` is the
//! mean reference angle times the mean rotation duration so the static rows
//! carry the same deg² units as the rotation rows.

use crate::error::{CalibrationError, Result};
use crate::estimator::estimate_bias;
use crate::linalg::{norm, Svd};
use crate::model::{residual_raw, Axis, CalibrationParams, RotationObservation, StaticObservation};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NonlinearMode {
    /// Scales and biases are all estimated.
    #[default]
    Full,
    /// Biases fixed from the stationary means; only scales are iterated.
    ScalesOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearOptions<T> {
    pub mode: NonlinearMode,
    pub max_iterations: usize,
    /// Bound on both the relative objective decrease and the relative step size.
    pub tolerance: T,
    pub max_halvings: usize,
}

impl<T: Scalar> Default for NonlinearOptions<T> {
    fn default() -> Self {
        Self {
            mode: NonlinearMode::Full,
            max_iterations: 200,
            tolerance: T::lit(1e-10),
            max_halvings: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearSolution<T> {
    pub params: CalibrationParams<T>,
    pub iterations: usize,
    /// Objective at the initial guess.
    pub initial_cost: T,
    /// Objective at the solution.
    pub cost: T,
}

/// Minimizes the squared-residual calibration objective from `init`.
pub fn calibrate_nonlinear<T: Scalar>(
    rotations: &[RotationObservation<T>],
    static_stage: &StaticObservation<T>,
    init: &CalibrationParams<T>,
    options: &NonlinearOptions<T>,
) -> Result<NonlinearSolution<T>> {
    if rotations.len() < 3 {
        return Err(CalibrationError::WrongRotationCount {
            expected: 3,
            got: rotations.len(),
        });
    }
    let theta_max = rotations
        .iter()
        .map(|r| r.theta_total)
        .fold(T::zero(), T::max);
    // objective below this is indistinguishable from zero in working precision
    let floor = {
        let e = T::epsilon() * theta_max * theta_max * T::lit(8.0);
        e * e * T::count(rotations.len() + 3)
    };

    match options.mode {
        NonlinearMode::Full => {
            let count = T::count(rotations.len());
            let mean_theta = rotations.iter().fold(T::zero(), |a, r| a + r.theta_total) / count;
            let mean_duration = rotations.iter().fold(T::zero(), |a, r| a + r.duration()) / count;
            let weight = mean_theta * mean_duration;
            let eval = |x: &[T; 6]| full_problem(x, rotations, static_stage, weight);
            let (x, iterations, initial_cost, cost) =
                gauss_newton(init.to_vector(), eval, floor, options)?;
            Ok(NonlinearSolution {
                params: CalibrationParams::from_vector(x)?,
                iterations,
                initial_cost,
                cost,
            })
        }
        NonlinearMode::ScalesOnly => {
            let bias = estimate_bias(static_stage)?;
            let eval = |k: &[T; 3]| scales_problem(k, &bias, rotations);
            let (k, iterations, initial_cost, cost) =
                gauss_newton(init.scale(), eval, floor, options)?;
            Ok(NonlinearSolution {
                params: CalibrationParams::new(k, bias)?,
                iterations,
                initial_cost,
                cost,
            })
        }
    }
}

type Problem<T, const P: usize> = (Vec<T>, Vec<[T; P]>);

fn full_problem<T: Scalar>(
    x: &[T; 6],
    rotations: &[RotationObservation<T>],
    static_stage: &StaticObservation<T>,
    weight: T,
) -> Problem<T, 6> {
    let scale = [x[0], x[1], x[2]];
    let bias = [x[3], x[4], x[5]];
    let two = T::lit(2.0);
    let mut residuals = Vec::with_capacity(rotations.len() + 3);
    let mut jacobian = Vec::with_capacity(rotations.len() + 3);
    for rot in rotations {
        let s = rot.corrected_sum(&bias);
        let duration = rot.duration();
        residuals.push(residual_raw(&scale, &bias, rot));
        let mut row = [T::zero(); 6];
        for l in 0..3 {
            row[l] = two * scale[l] * s[l] * s[l];
            row[3 + l] = two * scale[l] * scale[l] * s[l] * duration;
        }
        jacobian.push(row);
    }
    for l in 0..3 {
        let offset = static_stage.mean[l] + bias[l];
        residuals.push(weight * scale[l] * offset);
        let mut row = [T::zero(); 6];
        row[l] = weight * offset;
        row[3 + l] = weight * scale[l];
        jacobian.push(row);
    }
    (residuals, jacobian)
}

fn scales_problem<T: Scalar>(
    scale: &[T; 3],
    bias: &[T; 3],
    rotations: &[RotationObservation<T>],
) -> Problem<T, 3> {
    let two = T::lit(2.0);
    let residuals = rotations
        .iter()
        .map(|r| residual_raw(scale, bias, r))
        .collect();
    let jacobian = rotations
        .iter()
        .map(|r| {
            let s = r.corrected_sum(bias);
            let mut row = [T::zero(); 3];
            for l in 0..3 {
                row[l] = two * scale[l] * s[l] * s[l];
            }
            row
        })
        .collect();
    (residuals, jacobian)
}

fn sum_sq<T: Scalar>(r: &[T]) -> T {
    r.iter().fold(T::zero(), |acc, e| acc + *e * *e)
}

/// Returns `(solution, iterations, initial objective, final objective)`.
/// The first three unknowns are scale factors and must stay positive.
fn gauss_newton<T: Scalar, const P: usize, F>(
    x0: [T; P],
    eval: F,
    floor: T,
    options: &NonlinearOptions<T>,
) -> Result<([T; P], usize, T, T)>
where
    F: Fn(&[T; P]) -> Problem<T, P>,
{
    let mut x = x0;
    let (mut residuals, mut jacobian) = eval(&x);
    let mut cost = sum_sq(&residuals);
    let initial = cost;
    let half = T::lit(0.5);

    for iteration in 1..=options.max_iterations {
        if !(cost > floor) {
            return Ok((x, iteration - 1, initial, cost));
        }
        let neg: Vec<T> = residuals.iter().map(|r| -*r).collect();
        let step = Svd::new(&jacobian)
            .solve(&neg)
            .ok_or(CalibrationError::Singular)?;

        let mut alpha = T::one();
        let mut accepted = None;
        let mut non_positive = None;
        for _ in 0..=options.max_halvings {
            let mut candidate = x;
            for i in 0..P {
                candidate[i] = x[i] + alpha * step[i];
            }
            if let Some(axis) = (0..3.min(P)).find(|&l| !(candidate[l] > T::zero())) {
                non_positive = Axis::from_index(axis);
                alpha = alpha * half;
                continue;
            }
            let (r, j) = eval(&candidate);
            let c = sum_sq(&r);
            if c <= cost {
                accepted = Some((candidate, r, j, c));
                break;
            }
            alpha = alpha * half;
        }

        let Some((candidate, r, j, c)) = accepted else {
            if let Some(axis) = non_positive {
                return Err(CalibrationError::NonPositiveScale { axis, iteration });
            }
            // no descent available in working precision
            return Ok((x, iteration, initial, cost));
        };

        let mut delta = [T::zero(); P];
        for i in 0..P {
            delta[i] = candidate[i] - x[i];
        }
        let step_size = norm(&delta) / (T::one() + norm(&x));
        let improvement = if cost > T::zero() {
            (cost - c) / cost
        } else {
            T::zero()
        };

        x = candidate;
        residuals = r;
        jacobian = j;
        cost = c;

        if !(cost > floor) || (improvement <= options.tolerance && step_size <= options.tolerance) {
            return Ok((x, iteration, initial, cost));
        }
    }
    Err(CalibrationError::NoConvergence {
        iterations: options.max_iterations,
        residual: cost.to_f64().unwrap_or(f64::NAN),
    })
}
