//! Synthetic calibration sessions.
//!
//! A simulated sensor has random scale factors and biases, a slightly tilted
//! mounting, and white Gaussian noise. Each rotation stage follows a random
//! Bézier speed profile about one box axis; the tilt leaks part of that motion
//! onto the other sensor axes.

mod campaign;
mod profile;

pub use campaign::{
    derive_seed, replicate_truth, run_monte_carlo, simulate_replicate, CampaignReport,
    CampaignSummary, Quartiles, ReplicateRecord, PARAMETER_NAMES,
};
pub use profile::{bezier, bezier_profile, SpeedProfile};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CalibrationError, Result};
use crate::model::{
    apply_calibration, inverse_calibration, Axis, CalibrationParams, RawSample, Session,
};
use crate::session_log::{LogHeader, LogRow, Segment, SessionLog, Stage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub scale_range: (f64, f64),
    /// deg/s
    pub bias_range: (f64, f64),
    /// Off-diagonal mounting coupling; `(0, 0)` disables misalignment.
    pub misalignment_range: (f64, f64),
    /// Per-sample noise standard deviation, deg/s.
    pub noise_sigma: f64,
    /// Hz
    pub sample_rate: f64,
    /// s
    pub static_duration: f64,
    /// s, per rotation
    pub rotation_duration: f64,
    /// degrees
    pub rotation_angle: f64,
    /// Bézier control ordinates as multiples of the nominal rate.
    pub bezier_control_range: (f64, f64),
    pub n_param_sets: usize,
    pub n_sims_per_set: usize,
    /// Held-out rates per replicate for the before/after comparison.
    pub test_set_size: usize,
    /// Test-set true rates are uniform in `±test_rate_limit` deg/s per axis.
    pub test_rate_limit: f64,
    pub rng_seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            scale_range: (0.8, 1.2),
            bias_range: (-5.0, 5.0),
            misalignment_range: (-0.10, 0.10),
            noise_sigma: 0.03,
            sample_rate: 100.0,
            static_duration: 3.0,
            rotation_duration: 5.0,
            rotation_angle: 360.0,
            bezier_control_range: (0.5, 1.5),
            n_param_sets: 30,
            n_sims_per_set: 500,
            test_set_size: 1000,
            test_rate_limit: 100.0,
            rng_seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CalibrationError::InvalidArgument(msg));
        for (name, (lo, hi)) in [
            ("scale_range", self.scale_range),
            ("bias_range", self.bias_range),
            ("misalignment_range", self.misalignment_range),
            ("bezier_control_range", self.bezier_control_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(format!(
                    "{name} must be finite with lower <= upper, got ({lo}, {hi})"
                ));
            }
        }
        if !(self.scale_range.0 > 0.0) {
            return bad("scale_range must be strictly positive".into());
        }
        if !(self.bezier_control_range.0 > 0.0) {
            return bad("bezier_control_range must be strictly positive".into());
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return bad(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            ));
        }
        for (name, v) in [
            ("sample_rate", self.sample_rate),
            ("static_duration", self.static_duration),
            ("rotation_duration", self.rotation_duration),
            ("rotation_angle", self.rotation_angle),
            ("test_rate_limit", self.test_rate_limit),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if (self.static_duration * self.sample_rate).round() < 2.0
            || (self.rotation_duration * self.sample_rate).round() < 2.0
        {
            return bad("each stage needs at least 2 samples".into());
        }
        if self.n_param_sets == 0 || self.n_sims_per_set == 0 {
            return bad("n_param_sets and n_sims_per_set must be positive".into());
        }
        Ok(())
    }

    pub fn without_misalignment(mut self) -> Self {
        self.misalignment_range = (0.0, 0.0);
        self
    }

    fn static_samples(&self) -> usize {
        (self.static_duration * self.sample_rate).round() as usize
    }
}

pub(crate) fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// True sensor parameters and mounting of one simulated device.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub params: CalibrationParams<f64>,
    /// Unit diagonal; entry `[i][j]` couples box axis `j` into sensor axis `i`.
    pub misalignment: [[f64; 3]; 3],
}

impl GroundTruth {
    pub fn aligned(params: CalibrationParams<f64>) -> Self {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self {
            params,
            misalignment: m,
        }
    }

    /// Unit rotation axis, in sensor coordinates, of a turn about box axis `axis`:
    /// the normalized column of the coupling matrix. Normalizing keeps the
    /// rotation magnitude, since a mounting tilt cannot change the angle turned.
    pub fn rotation_axis(&self, axis: Axis) -> [f64; 3] {
        let j = axis.index();
        let col = [
            self.misalignment[0][j],
            self.misalignment[1][j],
            self.misalignment[2][j],
        ];
        let n = (col[0] * col[0] + col[1] * col[1] + col[2] * col[2]).sqrt();
        col.map(|v| v / n)
    }
}

pub fn sample_ground_truth<R: Rng + ?Sized>(config: &SimulationConfig, rng: &mut R) -> GroundTruth {
    let scale = [(); 3].map(|_| uniform(rng, config.scale_range));
    let bias = [(); 3].map(|_| uniform(rng, config.bias_range));
    let mut misalignment = [[0.0; 3]; 3];
    for (i, row) in misalignment.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j {
                1.0
            } else {
                uniform(rng, config.misalignment_range)
            };
        }
    }
    GroundTruth {
        params: CalibrationParams::new(scale, bias).expect("configured ranges yield valid params"),
        misalignment,
    }
}

/// Held-out true rates and what the sensor reported for them.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub true_rates: Vec<[f64; 3]>,
    pub raw: Vec<RawSample<f64>>,
}

impl TestSet {
    fn rms(&self, estimate: impl Fn(&RawSample<f64>) -> [f64; 3]) -> f64 {
        let mut acc = 0.0;
        for (g, m) in self.true_rates.iter().zip(&self.raw) {
            let e = estimate(m);
            for l in 0..3 {
                acc += (e[l] - g[l]).powi(2);
            }
        }
        (acc / (3 * self.true_rates.len().max(1)) as f64).sqrt()
    }

    /// RMS error of the raw readings, deg/s.
    pub fn rms_before(&self) -> f64 {
        self.rms(|m| m.0)
    }

    /// RMS error after correcting with `params`, deg/s.
    pub fn rms_after(&self, params: &CalibrationParams<f64>) -> f64 {
        self.rms(|m| apply_calibration(params, m))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSession {
    pub log: SessionLog,
    pub session: Session<f64>,
    pub profiles: Vec<SpeedProfile>,
    pub test_set: TestSet,
}

struct Sensor<'a> {
    truth: &'a GroundTruth,
    noise: Option<Normal<f64>>,
}

impl Sensor<'_> {
    fn read<R: Rng + ?Sized>(&self, rng: &mut R, true_rate: &[f64; 3]) -> RawSample<f64> {
        let mut m = inverse_calibration(&self.truth.params, true_rate);
        if let Some(noise) = &self.noise {
            for v in m.0.iter_mut() {
                *v += noise.sample(rng);
            }
        }
        m
    }
}

/// Static stage, one rotation about each box axis, and a held-out test set.
pub fn simulate_session<R: Rng + ?Sized>(
    truth: &GroundTruth,
    config: &SimulationConfig,
    rng: &mut R,
) -> Result<SimulatedSession> {
    config.validate()?;
    let sensor = Sensor {
        truth,
        noise: (config.noise_sigma > 0.0)
            .then(|| Normal::new(0.0, config.noise_sigma).expect("validated noise level")),
    };
    let dt = 1.0 / config.sample_rate;
    let mut segments = Vec::with_capacity(4);

    let static_rows = (0..config.static_samples())
        .map(|j| LogRow {
            t: j as f64 * dt,
            m: sensor.read(rng, &[0.0; 3]).0,
        })
        .collect();
    segments.push(Segment {
        stage: Stage::Static,
        line: None,
        rows: static_rows,
    });

    let mut profiles = Vec::with_capacity(3);
    for (r, axis) in Axis::ALL.into_iter().enumerate() {
        let profile = bezier_profile(
            rng,
            config.rotation_duration,
            config.sample_rate,
            config.rotation_angle,
            config.bezier_control_range,
        );
        let direction = truth.rotation_axis(axis);
        let t0 = config.static_duration + r as f64 * config.rotation_duration;
        let rows = profile
            .samples
            .iter()
            .enumerate()
            .map(|(j, w)| LogRow {
                t: t0 + j as f64 * dt,
                m: sensor.read(rng, &direction.map(|u| u * w)).0,
            })
            .collect();
        segments.push(Segment {
            stage: Stage::Rotate(axis),
            line: None,
            rows,
        });
        profiles.push(profile);
    }

    let mut true_rates = Vec::with_capacity(config.test_set_size);
    let mut raw = Vec::with_capacity(config.test_set_size);
    let limit = config.test_rate_limit;
    for _ in 0..config.test_set_size {
        let g = [(); 3].map(|_| uniform(rng, (-limit, limit)));
        raw.push(sensor.read(rng, &g));
        true_rates.push(g);
    }

    let log = SessionLog {
        header: LogHeader {
            sample_rate: config.sample_rate,
            full_scale: None,
            device: "simulated".into(),
            theta_total: config.rotation_angle,
        },
        segments,
    };
    let session = log
        .to_session()
        .map_err(|e| CalibrationError::InvalidSession(e.to_string()))?;
    Ok(SimulatedSession {
        log,
        session,
        profiles,
        test_set: TestSet { true_rates, raw },
    })
}
