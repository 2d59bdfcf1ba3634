//! Monte-Carlo campaigns: many devices, many sessions per device.
//!
//! Every replicate draws from its own ChaCha stream keyed by
//! `(seed, set, replicate)`, so results do not depend on execution order and a
//! campaign is bit-identical across runs and thread counts.

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{
    sample_ground_truth, simulate_session, GroundTruth, SimulatedSession, SimulationConfig,
};
use crate::error::Result;
use crate::estimator::calibrate;

pub const PARAMETER_NAMES: [&str; 6] = ["k_x", "k_y", "k_z", "b_x", "b_y", "b_z"];

/// Stream index reserved for drawing a parameter set's ground truth.
const TRUTH_STREAM: u64 = u32::MAX as u64;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of replicate `replicate` in parameter set `set`.
pub fn derive_seed(seed: u64, set: usize, replicate: u64) -> u64 {
    splitmix64(seed ^ splitmix64(((set as u64) << 32) ^ replicate))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub set: usize,
    pub replicate: usize,
    pub seed: u64,
    pub truth: [f64; 6],
    pub estimate: Option<[f64; 6]>,
    /// `estimate − truth`
    pub error: Option<[f64; 6]>,
    pub rms_before: f64,
    pub rms_after: Option<f64>,
    pub failure: Option<String>,
}

/// Five-number summary with linearly interpolated quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Quartiles {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.total_cmp(b));
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignSummary {
    pub noise_sigma: f64,
    pub n_param_sets: usize,
    pub n_sims_per_set: usize,
    pub replicates: usize,
    pub failures: usize,
    /// Estimation error per parameter.
    pub parameter_error: BTreeMap<String, Quartiles>,
    pub rms_before: Option<Quartiles>,
    pub rms_after: Option<Quartiles>,
    /// `1 − rms_after / rms_before` per replicate.
    pub rms_reduction: Option<Quartiles>,
    /// Fraction of successful replicates whose test-set RMS error decreased.
    pub improved_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignReport {
    pub config: SimulationConfig,
    pub replicates: Vec<ReplicateRecord>,
    pub summary: CampaignSummary,
}

/// Ground truth shared by every replicate of parameter set `set`.
pub fn replicate_truth(config: &SimulationConfig, set: usize) -> GroundTruth {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.rng_seed, set, TRUTH_STREAM));
    sample_ground_truth(config, &mut rng)
}

/// The session simulated for replicate `replicate` of set `set`, exactly as
/// [`run_monte_carlo`] sees it.
pub fn simulate_replicate(
    config: &SimulationConfig,
    truth: &GroundTruth,
    set: usize,
    replicate: usize,
) -> Result<SimulatedSession> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.rng_seed, set, replicate as u64));
    simulate_session(truth, config, &mut rng)
}

fn run_replicate(
    config: &SimulationConfig,
    truth: &GroundTruth,
    set: usize,
    replicate: usize,
) -> ReplicateRecord {
    let truth_vec = truth.params.to_vector();
    let mut record = ReplicateRecord {
        set,
        replicate,
        seed: derive_seed(config.rng_seed, set, replicate as u64),
        truth: truth_vec,
        estimate: None,
        error: None,
        rms_before: f64::NAN,
        rms_after: None,
        failure: None,
    };
    let sim = match simulate_replicate(config, truth, set, replicate) {
        Ok(sim) => sim,
        Err(e) => {
            record.failure = Some(e.to_string());
            return record;
        }
    };
    record.rms_before = sim.test_set.rms_before();
    match calibrate(&sim.session) {
        Ok(params) => {
            let est = params.to_vector();
            let mut err = [0.0; 6];
            for i in 0..6 {
                err[i] = est[i] - truth_vec[i];
            }
            record.estimate = Some(est);
            record.error = Some(err);
            record.rms_after = Some(sim.test_set.rms_after(&params));
        }
        Err(e) => record.failure = Some(e.to_string()),
    }
    record
}

pub fn run_monte_carlo(config: &SimulationConfig) -> Result<CampaignReport> {
    config.validate()?;
    let truths: Vec<GroundTruth> = (0..config.n_param_sets)
        .map(|set| replicate_truth(config, set))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..config.n_param_sets)
        .flat_map(|s| (0..config.n_sims_per_set).map(move |r| (s, r)))
        .collect();
    let replicates: Vec<ReplicateRecord> = jobs
        .par_iter()
        .map(|&(set, rep)| run_replicate(config, &truths[set], set, rep))
        .collect();
    let summary = summarize(config, &replicates);
    Ok(CampaignReport {
        config: config.clone(),
        replicates,
        summary,
    })
}

fn summarize(config: &SimulationConfig, replicates: &[ReplicateRecord]) -> CampaignSummary {
    let ok: Vec<&ReplicateRecord> = replicates.iter().filter(|r| r.error.is_some()).collect();
    let parameter_error = PARAMETER_NAMES
        .iter()
        .enumerate()
        .filter_map(|(i, name)| {
            let values: Vec<f64> = ok.iter().map(|r| r.error.expect("filtered")[i]).collect();
            Quartiles::from_values(&values).map(|q| (name.to_string(), q))
        })
        .collect();
    let before: Vec<f64> = ok.iter().map(|r| r.rms_before).collect();
    let after: Vec<f64> = ok.iter().filter_map(|r| r.rms_after).collect();
    let reduction: Vec<f64> = ok
        .iter()
        .filter_map(|r| r.rms_after.map(|a| 1.0 - a / r.rms_before))
        .collect();
    let improved = ok
        .iter()
        .filter(|r| r.rms_after.is_some_and(|a| a < r.rms_before))
        .count();
    CampaignSummary {
        noise_sigma: config.noise_sigma,
        n_param_sets: config.n_param_sets,
        n_sims_per_set: config.n_sims_per_set,
        replicates: replicates.len(),
        failures: replicates.len() - ok.len(),
        parameter_error,
        rms_before: Quartiles::from_values(&before),
        rms_after: Quartiles::from_values(&after),
        rms_reduction: Quartiles::from_values(&reduction),
        improved_fraction: if ok.is_empty() {
            0.0
        } else {
            improved as f64 / ok.len() as f64
        },
    }
}

impl CampaignReport {
    /// One row per replicate: identifiers, truth, estimate, error, test-set RMS.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![
            "noise_sigma".to_string(),
            "set".into(),
            "replicate".into(),
            "seed".into(),
        ];
        for suffix in ["true", "est", "err"] {
            header.extend(PARAMETER_NAMES.iter().map(|p| format!("{p}_{suffix}")));
        }
        header.extend(["rms_before".into(), "rms_after".into(), "status".into()]);
        out.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.replicates {
            let mut row = vec![
                self.config.noise_sigma.to_string(),
                r.set.to_string(),
                r.replicate.to_string(),
                r.seed.to_string(),
            ];
            row.extend(r.truth.iter().map(f64::to_string));
            for arr in [r.estimate, r.error] {
                row.extend((0..6).map(|i| opt(arr.map(|a| a[i]))));
            }
            row.push(r.rms_before.to_string());
            row.push(opt(r.rms_after));
            row.push(r.failure.clone().unwrap_or_else(|| "ok".into()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}
