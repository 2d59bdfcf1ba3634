//! Commands behind the `gyrocal` binary. Each returns a value the binary
//! prints, so the same code paths are exercised by the tests.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use gyrocal::session_log::SessionLog;
use gyrocal::simulator::{
    replicate_truth, run_monte_carlo, simulate_replicate, CampaignSummary, SimulationConfig,
};
use gyrocal::verify::{run_suite, SuiteReport};
use gyrocal::{calibrate_with, Axis, CalibrateOptions, Params64};

pub const PARAMETERS: [&str; 6] = ["k_x", "k_y", "k_z", "b_x", "b_y", "b_z"];

/// Flat parameter record, the interchange format between `calibrate`,
/// `simulate --emit-log` and `compare`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub k_x: f64,
    pub k_y: f64,
    pub k_z: f64,
    pub b_x: f64,
    pub b_y: f64,
    pub b_z: f64,
}

impl ParameterSet {
    pub fn to_array(&self) -> [f64; 6] {
        [self.k_x, self.k_y, self.k_z, self.b_x, self.b_y, self.b_z]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            k_x: v[0],
            k_y: v[1],
            k_z: v[2],
            b_x: v[3],
            b_y: v[4],
            b_z: v[5],
        }
    }
}

impl From<&Params64> for ParameterSet {
    fn from(p: &Params64) -> Self {
        Self::from_array(p.to_vector())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Units {
    pub scale: &'static str,
    pub bias: &'static str,
}

const UNITS: Units = Units {
    scale: "dimensionless",
    bias: "deg/s",
};

// ---------------------------------------------------------------- simulate

/// `noise_levels = [..]` in the config runs one campaign per level; the rest of
/// the table is a [`SimulationConfig`].
pub fn load_config(path: Option<&Path>) -> Result<(SimulationConfig, Vec<f64>)> {
    let Some(path) = path else {
        let config = SimulationConfig::default();
        let levels = vec![config.noise_sigma];
        return Ok((config, levels));
    };
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut table: toml::Table = text
        .parse()
        .with_context(|| format!("parsing config {}", path.display()))?;
    let levels = match table.remove("noise_levels") {
        None => None,
        Some(v) => {
            let arr = v
                .as_array()
                .ok_or_else(|| anyhow!("noise_levels must be an array"))?;
            let levels = arr
                .iter()
                .map(|x| x.as_float().or_else(|| x.as_integer().map(|i| i as f64)))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| anyhow!("noise_levels must contain numbers"))?;
            if levels.is_empty() {
                bail!("noise_levels must not be empty");
            }
            Some(levels)
        }
    };
    let config: SimulationConfig = toml::Value::Table(table)
        .try_into()
        .with_context(|| format!("invalid config {}", path.display()))?;
    let levels = levels.unwrap_or_else(|| vec![config.noise_sigma]);
    Ok((config, levels))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignOutput {
    pub config: SimulationConfig,
    pub levels: Vec<CampaignSummary>,
}

pub struct SimulateArgs<'a> {
    pub config: Option<&'a Path>,
    pub seed: Option<u64>,
    pub out: &'a Path,
    /// Also export the session of the first replicate as a log, with its
    /// ground truth alongside as `<log>.truth.json`.
    pub emit_log: Option<&'a Path>,
}

/// Writes `replicates.csv` and `summary.json` into `out`.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<CampaignOutput> {
    let (mut config, levels) = load_config(args.config)?;
    if let Some(seed) = args.seed {
        config.rng_seed = seed;
    }
    fs::create_dir_all(args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let mut csv = Vec::new();
    let mut summaries = Vec::new();
    for (i, &sigma) in levels.iter().enumerate() {
        let level = SimulationConfig {
            noise_sigma: sigma,
            ..config.clone()
        };
        let report =
            run_monte_carlo(&level).with_context(|| format!("campaign at noise {sigma}"))?;
        let mut block = Vec::new();
        report.write_csv(&mut block)?;
        // one header for the whole file
        let skip = if i == 0 {
            0
        } else {
            block.iter().position(|&c| c == b'\n').map_or(0, |p| p + 1)
        };
        csv.extend_from_slice(&block[skip..]);
        summaries.push(report.summary);
    }
    write_file(&args.out.join("replicates.csv"), &csv)?;
    let output = CampaignOutput {
        config: SimulationConfig {
            noise_sigma: levels[0],
            ..config
        },
        levels: summaries,
    };
    write_file(&args.out.join("summary.json"), to_json(&output)?.as_bytes())?;

    if let Some(log_path) = args.emit_log {
        let level = &output.config;
        let truth = replicate_truth(level, 0);
        let sim = simulate_replicate(level, &truth, 0, 0)?;
        write_file(log_path, sim.log.to_text().as_bytes())?;
        let truth_json = to_json(&ParameterSet::from(&truth.params))?;
        write_file(&truth_path(log_path), truth_json.as_bytes())?;
    }
    Ok(output)
}

pub fn truth_path(log_path: &Path) -> PathBuf {
    let mut name = log_path.file_name().unwrap_or_default().to_os_string();
    name.push(".truth.json");
    log_path.with_file_name(name)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

// --------------------------------------------------------------- calibrate

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub device: String,
    pub sample_rate: f64,
    pub condition_number: f64,
    pub static_samples: usize,
    /// Per-axis sample standard deviation of the stationary stage, deg/s.
    pub static_std: [f64; 3],
    /// Raw `Σ m · dt` per rotation, degrees.
    pub rotation_sums: Vec<[f64; 3]>,
    pub rotation_axes: Vec<Axis>,
    pub saturated_samples: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationOutput {
    #[serde(flatten)]
    pub params: ParameterSet,
    pub units: Units,
    pub diagnostics: Diagnostics,
}

/// Default expected stationary noise, deg/s; the stage is rejected above five
/// times this.
pub const DEFAULT_STATIC_NOISE: f64 = 0.15;

pub fn cmd_calibrate(log_path: &Path, static_noise: Option<f64>) -> Result<CalibrationOutput> {
    let text =
        fs::read_to_string(log_path).with_context(|| format!("reading {}", log_path.display()))?;
    let log =
        SessionLog::parse(&text).with_context(|| format!("parsing {}", log_path.display()))?;
    calibrate_log(&log, static_noise)
}

pub fn calibrate_log(log: &SessionLog, static_noise: Option<f64>) -> Result<CalibrationOutput> {
    let session = log.to_session()?;
    let options = CalibrateOptions {
        static_noise,
        ..Default::default()
    };
    let cal = calibrate_with(&session, &options).map_err(|e| match e {
        gyrocal::CalibrationError::StaticMotion { .. } => {
            anyhow!("protocol violation in static stage: {e}")
        }
        gyrocal::CalibrationError::NearStaticRotation { index, .. } => {
            anyhow!("protocol violation in rotation {}: {e}", index + 1)
        }
        e => anyhow!(e),
    })?;

    let axes = log.rotation_axes();
    let saturated = log.saturated_samples();
    let mut warnings = Vec::new();
    let mut sorted = axes.clone();
    sorted.sort_by_key(|a| a.index());
    if sorted != Axis::ALL {
        let tags: Vec<&str> = axes.iter().map(|a| a.as_str()).collect();
        warnings.push(format!(
            "rotations about [{}] differ from one turn per axis; the design is not G-optimal",
            tags.join(", ")
        ));
    }
    if saturated > 0 {
        warnings.push(format!(
            "{saturated} samples at or beyond full scale; rotation sums may be clipped"
        ));
    }
    Ok(CalibrationOutput {
        params: ParameterSet::from(&cal.params),
        units: UNITS,
        diagnostics: Diagnostics {
            device: log.header.device.clone(),
            sample_rate: log.header.sample_rate,
            condition_number: cal.condition_number,
            static_samples: session.static_stage.n_samples,
            static_std: session.static_stage.std,
            rotation_sums: session.rotations.iter().map(|r| r.sum).collect(),
            rotation_axes: axes,
            saturated_samples: saturated,
            warnings,
        },
    })
}

pub fn render_json<T: Serialize>(value: &T) -> Result<String> {
    to_json(value)
}

// ----------------------------------------------------------------- compare

/// Reads the six parameters from any JSON object carrying them at top level.
pub fn read_parameters(path: &Path) -> Result<ParameterSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    parameters_from_value(&value).with_context(|| format!("in {}", path.display()))
}

pub fn parameters_from_value(value: &Value) -> Result<ParameterSet> {
    let obj = value
        .as_object()
        .ok_or_else(|| anyhow!("expected a JSON object"))?;
    let mut v = [0.0; 6];
    for (slot, name) in v.iter_mut().zip(PARAMETERS) {
        *slot = obj
            .get(name)
            .ok_or_else(|| anyhow!("missing field `{name}`"))?
            .as_f64()
            .ok_or_else(|| anyhow!("field `{name}` is not a number"))?;
    }
    Ok(ParameterSet::from_array(v))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub parameter: &'static str,
    pub a: f64,
    pub b: f64,
    /// `b − a`
    pub difference: f64,
    /// `difference` rounded for display.
    pub rounded: String,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub threshold: f64,
    pub decimals: usize,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn new(a: &ParameterSet, b: &ParameterSet, threshold: f64, decimals: usize) -> Self {
        let rows = PARAMETERS
            .iter()
            .zip(a.to_array().into_iter().zip(b.to_array()))
            .map(|(&parameter, (a, b))| {
                let difference = b - a;
                ComparisonRow {
                    parameter,
                    a,
                    b,
                    difference,
                    rounded: fixed(difference, decimals),
                    flagged: difference.abs() > threshold,
                }
            })
            .collect();
        Self {
            threshold,
            decimals,
            rows,
        }
    }

    pub fn flagged(&self) -> usize {
        self.rows.iter().filter(|r| r.flagged).count()
    }
}

/// Fixed-point text without a negative zero.
fn fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.decimals;
        writeln!(
            f,
            "{:<10} {:>12} {:>12} {:>12}",
            "parameter", "A", "B", "difference"
        )?;
        for r in &self.rows {
            let mark = if r.flagged { "  *" } else { "" };
            writeln!(
                f,
                "{:<10} {:>12} {:>12} {:>12}{mark}",
                r.parameter,
                fixed(r.a, d),
                fixed(r.b, d),
                r.rounded
            )?;
        }
        write!(
            f,
            "{} of 6 differences exceed {}",
            self.flagged(),
            self.threshold
        )
    }
}

pub fn cmd_compare(a: &Path, b: &Path, threshold: f64, decimals: usize) -> Result<Comparison> {
    if threshold.is_nan() || threshold < 0.0 {
        bail!("threshold must be non-negative, got {threshold}");
    }
    Ok(Comparison::new(
        &read_parameters(a)?,
        &read_parameters(b)?,
        threshold,
        decimals,
    ))
}

// ------------------------------------------------------------------ verify

pub fn cmd_verify(suite: &str) -> Result<SuiteReport> {
    run_suite(suite).ok_or_else(|| anyhow!("unknown suite `{suite}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_has_no_negative_zero() {
        assert_eq!(fixed(-0.00001, 4), "0.0000");
        assert_eq!(fixed(0.0, 4), "0.0000");
        assert_eq!(fixed(-0.0275, 4), "-0.0275");
        assert_eq!(fixed(1.1983 - 1.1879, 4), "0.0104");
    }

    #[test]
    fn comparison_flags_large_differences() {
        let a = ParameterSet::from_array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        let b = ParameterSet::from_array([1.0, 1.05, 1.0, 0.0, -0.031, 0.0]);
        let c = Comparison::new(&a, &b, 0.03, 4);
        let flagged: Vec<_> = c
            .rows
            .iter()
            .filter(|r| r.flagged)
            .map(|r| r.parameter)
            .collect();
        assert_eq!(flagged, ["k_y", "b_y"]);
        assert!(c.to_string().ends_with("2 of 6 differences exceed 0.03"));
    }

    #[test]
    fn parameters_need_every_field() {
        let v: Value = serde_json::json!({"k_x": 1, "k_y": 1, "k_z": 1, "b_x": 0, "b_y": 0});
        let err = parameters_from_value(&v).unwrap_err().to_string();
        assert!(err.contains("b_z"), "{err}");
        let v: Value =
            serde_json::json!({"k_x": 1, "k_y": "1", "k_z": 1, "b_x": 0, "b_y": 0, "b_z": 0});
        assert!(parameters_from_value(&v).is_err());
    }

    #[test]
    fn truth_file_sits_next_to_log() {
        assert_eq!(
            truth_path(Path::new("/tmp/a/session.csv")),
            Path::new("/tmp/a/session.csv.truth.json")
        );
    }
}
