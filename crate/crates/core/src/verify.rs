//! Self-check suites run by `gyrocal verify`.
//!
//! Each suite re-derives known properties of the design and sensitivity
//! analyses from scratch and reports one line per check.

use std::fmt;

use crate::doe::{canonical_design, is_g_optimal, max_spv_sphere, spv, Design};
use crate::model::{CalibrationParams, RotationObservation};
use crate::observability::{
    analytic_grad, finite_difference_grad, grad_bias, grad_scale, grad_scale_model_term,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn check(&mut self, name: &'static str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name,
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

pub const SUITES: [&str; 2] = ["doe", "observability"];

pub fn run_suite(name: &str) -> Option<SuiteReport> {
    match name {
        "doe" => Some(doe_suite()),
        "observability" => Some(observability_suite()),
        _ => None,
    }
}

pub fn doe_suite() -> SuiteReport {
    let mut r = SuiteReport::default();
    let canonical = canonical_design::<f64>();

    let max = max_spv_sphere(&canonical);
    r.check(
        "canonical max SPV",
        max.as_ref().is_ok_and(|m| (m - 3.0).abs() < 1e-9),
        show(&max, "expected 3"),
    );

    let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let at_axes: Vec<f64> = axes
        .iter()
        .filter_map(|a| spv(&canonical, a).ok())
        .collect();
    r.check(
        "canonical SPV at design points",
        at_axes.len() == 3 && at_axes.iter().all(|v| (v - 3.0).abs() < 1e-12),
        format!("{at_axes:?}"),
    );

    let s = 1.0 / 3f64.sqrt();
    let diag = spv(&canonical, &[s, s, s]);
    r.check(
        "canonical SPV is rotation invariant",
        diag.as_ref().is_ok_and(|v| (v - 3.0).abs() < 1e-12),
        show(&diag, "on the body diagonal"),
    );

    let verdict = is_g_optimal(&canonical, 1e-9);
    r.check(
        "canonical design is G-optimal",
        verdict.optimal,
        format!("max SPV {}", verdict.max_spv),
    );

    let redundant = Design::<f64>::new(vec![
        [1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ])
    .expect("valid design");
    let verdict = is_g_optimal(&redundant, 1e-9);
    r.check(
        "repeated rotation is not G-optimal",
        !verdict.optimal && (verdict.max_spv - 4.0).abs() < 1e-9,
        format!("max SPV {}, expected 4", verdict.max_spv),
    );

    let shrunk = Design::<f64>::new(vec![[0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.5]])
        .expect("valid design");
    let verdict = is_g_optimal(&shrunk, 1e-9);
    r.check(
        "half-turn design is not G-optimal",
        !verdict.optimal && (verdict.max_spv - 12.0).abs() < 1e-9,
        format!("max SPV {}, expected 12", verdict.max_spv),
    );

    let singular =
        Design::new(vec![[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).expect("valid design");
    r.check(
        "rank-deficient design is rejected",
        max_spv_sphere(&singular).is_err() && !is_g_optimal(&singular, 1e-9).optimal,
        "no rotation about z",
    );
    r
}

fn show(value: &crate::Result<f64>, note: &str) -> String {
    match value {
        Ok(v) => format!("{v}, {note}"),
        Err(e) => format!("{e}, {note}"),
    }
}

fn rotation(sum: [f64; 3]) -> RotationObservation<f64> {
    RotationObservation::new(sum, 360.0, 500, 0.01).expect("valid rotation")
}

fn rel_err(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    diff / a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub fn observability_suite() -> SuiteReport {
    let mut r = SuiteReport::default();
    let id = CalibrationParams::identity();
    let at_rest = [rotation([0.0; 3])];

    let g = grad_scale_model_term(&id, &at_rest).expect("non-empty");
    r.check(
        "scales unobservable at rest",
        g == [0.0; 3],
        format!("dJ/dk = {g:?}"),
    );

    let biased = CalibrationParams::new([1.0; 3], [0.5, -0.3, 0.2]).expect("valid params");
    let g = grad_bias(&biased, &at_rest).expect("non-empty");
    r.check(
        "biases observable at rest",
        g.iter().all(|v| *v != 0.0),
        format!("dJ/db = {g:?}"),
    );

    let one = grad_scale(&id, &[rotation([360.0, 0.0, 0.0])]).expect("non-empty")[0].abs();
    let two = grad_scale(&id, &[rotation([720.0, 0.0, 0.0])]).expect("non-empty")[0].abs();
    r.check(
        "scale sensitivity grows with rotation",
        two > one,
        format!("|dJ/dk_x| {one:.4e} at 360°, {two:.4e} at 720°"),
    );

    let p = CalibrationParams::new([1.05, 0.92, 1.13], [0.4, -0.8, 1.6]).expect("valid params");
    let rots = [
        rotation([340.0, 12.0, -7.0]),
        rotation([-4.0, 395.0, 9.0]),
        rotation([6.0, -11.0, 310.0]),
    ];
    let a = analytic_grad(&p, &rots).expect("non-empty");
    let e = rel_err(
        &a,
        &finite_difference_grad(&p, &rots, 1e-5).expect("valid step"),
    );
    r.check(
        "analytic gradient matches central differences",
        e < 1e-6,
        format!("relative error {e:.3e}"),
    );

    let e1 = rel_err(
        &a,
        &finite_difference_grad(&p, &rots, 4e-2).expect("valid step"),
    );
    let e2 = rel_err(
        &a,
        &finite_difference_grad(&p, &rots, 2e-2).expect("valid step"),
    );
    let ratio = e1 / e2;
    r.check(
        "central differences converge at second order",
        (3.5..4.5).contains(&ratio),
        format!("error ratio {ratio:.3} on halving h"),
    );
    r
}
