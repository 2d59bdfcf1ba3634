use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gyrocal::calibrate;
use gyrocal::session_log::SessionLog;
use gyrocal::simulator::{replicate_truth, simulate_replicate, SimulationConfig};
use gyrocal_cli::{cmd_calibrate, cmd_compare, parameters_from_value, truth_path};
use serde_json::Value;
use tempfile::TempDir;

fn gyrocal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gyrocal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn small_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(
        &path,
        format!("n_param_sets = 2\nn_sims_per_set = 10\ntest_set_size = 100\n{body}"),
    )
    .unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_is_reproducible_with_a_seed() {
    let dir = TempDir::new().unwrap();
    let config = small_config(dir.path(), "noise_levels = [0.03, 0.15]\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = gyrocal(&[
            "simulate",
            "--config",
            s(&config),
            "--seed",
            "42",
            "--out",
            s(out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["replicates.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let csv = fs::read_to_string(a.join("replicates.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 20);
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["levels"].as_array().unwrap().len(), 2);
    assert_eq!(summary["config"]["rng_seed"], 42);

    let c = dir.path().join("c");
    gyrocal(&[
        "simulate",
        "--config",
        s(&config),
        "--seed",
        "43",
        "--out",
        s(&c),
    ]);
    assert_ne!(
        fs::read(a.join("replicates.csv")).unwrap(),
        fs::read(c.join("replicates.csv")).unwrap()
    );
}

#[test]
fn zero_noise_campaign_is_exact() {
    let dir = TempDir::new().unwrap();
    let config = small_config(
        dir.path(),
        "noise_sigma = 0.0\nmisalignment_range = [0.0, 0.0]\n",
    );
    let out = dir.path().join("out");
    assert!(
        gyrocal(&["simulate", "--config", s(&config), "--out", s(&out)])
            .status
            .success()
    );
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let level = &summary["levels"][0];
    assert_eq!(level["failures"], 0);
    for (name, q) in level["parameter_error"].as_object().unwrap() {
        for key in ["min", "max"] {
            assert!(q[key].as_f64().unwrap().abs() < 1e-9, "{name} {key}");
        }
    }
}

#[test]
fn bad_config_fails_with_diagnostic() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    for body in [
        "noise_sigma = -1.0\n",
        "unknown_key = 3\n",
        "scale_range = \"wide\"\n",
        "noise_levels = []\n",
    ] {
        let config = small_config(dir.path(), body);
        let o = gyrocal(&["simulate", "--config", s(&config), "--out", s(&out)]);
        assert!(!o.status.success(), "{body}");
        assert!(
            String::from_utf8_lossy(&o.stderr).starts_with("error:"),
            "{body}"
        );
    }
    let o = gyrocal(&[
        "simulate",
        "--config",
        "/nonexistent/config.toml",
        "--out",
        s(&out),
    ]);
    assert!(!o.status.success());
}

#[test]
fn calibrating_an_emitted_log_matches_the_simulation() {
    let dir = TempDir::new().unwrap();
    let config = small_config(dir.path(), "");
    let log = dir.path().join("session.csv");
    let o = gyrocal(&[
        "simulate",
        "--config",
        s(&config),
        "--seed",
        "5",
        "--out",
        s(&dir.path().join("out")),
        "--emit-log",
        s(&log),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let o = gyrocal(&["calibrate", s(&log)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: Value = serde_json::from_slice(&o.stdout).unwrap();
    let from_cli = parameters_from_value(&json).unwrap().to_array();

    let sim_config = SimulationConfig {
        n_param_sets: 2,
        n_sims_per_set: 10,
        test_set_size: 100,
        rng_seed: 5,
        ..Default::default()
    };
    let truth = replicate_truth(&sim_config, 0);
    let sim = simulate_replicate(&sim_config, &truth, 0, 0).unwrap();
    assert_eq!(from_cli, calibrate(&sim.session).unwrap().to_vector());

    let truth_json: Value =
        serde_json::from_str(&fs::read_to_string(truth_path(&log)).unwrap()).unwrap();
    assert_eq!(
        parameters_from_value(&truth_json).unwrap().to_array(),
        truth.params.to_vector()
    );
    assert_eq!(json["units"]["bias"], "deg/s");
    assert_eq!(
        json["diagnostics"]["rotation_axes"],
        serde_json::json!(["x", "y", "z"])
    );
    assert_eq!(
        json["diagnostics"]["rotation_sums"]
            .as_array()
            .unwrap()
            .len(),
        3
    );
}

#[test]
fn noiseless_log_recovers_truth() {
    let dir = TempDir::new().unwrap();
    let config = small_config(dir.path(), "noise_sigma = 0.0\n");
    let log = dir.path().join("session.csv");
    let out = dir.path().join("out");
    assert!(gyrocal(&[
        "simulate",
        "--config",
        s(&config),
        "--out",
        s(&out),
        "--emit-log",
        s(&log)
    ])
    .status
    .success());
    let cal = cmd_calibrate(&log, Some(0.15)).unwrap();
    let truth: Value =
        serde_json::from_str(&fs::read_to_string(truth_path(&log)).unwrap()).unwrap();
    let truth = parameters_from_value(&truth).unwrap().to_array();
    for (a, b) in cal.params.to_array().iter().zip(truth) {
        assert!((a - b).abs() < 1e-9);
    }
}

fn write_log(dir: &Path, static_noise: f64) -> PathBuf {
    let config = SimulationConfig {
        noise_sigma: 0.03,
        ..Default::default()
    };
    let truth = replicate_truth(&config, 0);
    let mut sim = simulate_replicate(&config, &truth, 0, 0).unwrap();
    // shake the sensor during the static stage
    for (i, row) in sim.log.segments[0].rows.iter_mut().enumerate() {
        row.m[1] += if i % 2 == 0 {
            static_noise
        } else {
            -static_noise
        };
    }
    let path = dir.join("log.csv");
    fs::write(&path, sim.log.to_text()).unwrap();
    path
}

#[test]
fn motion_during_static_stage_is_a_protocol_violation() {
    let dir = TempDir::new().unwrap();
    let log = write_log(dir.path(), 2.0);
    let o = gyrocal(&["calibrate", s(&log)]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("protocol violation in static stage"), "{err}");
    assert!(gyrocal(&["calibrate", s(&log), "--no-motion-check"])
        .status
        .success());
    assert!(gyrocal(&["calibrate", s(&log), "--static-noise", "1.0"])
        .status
        .success());
    assert!(cmd_calibrate(&write_log(dir.path(), 0.0), Some(0.15)).is_ok());
}

#[test]
fn truncated_log_names_the_line() {
    let dir = TempDir::new().unwrap();
    let log = write_log(dir.path(), 0.0);
    let text = fs::read_to_string(&log).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let cut = lines.len() - 10;
    let last = lines[cut].rsplit_once(',').unwrap().0;
    let truncated = format!("{}\n{last}\n", lines[..cut].join("\n"));
    fs::write(&log, truncated).unwrap();
    let o = gyrocal(&["calibrate", s(&log)]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(&format!("line {}", cut + 1)), "{err}");
}

#[test]
fn missing_stage_is_reported() {
    let dir = TempDir::new().unwrap();
    let log = write_log(dir.path(), 0.0);
    let mut parsed = SessionLog::parse(&fs::read_to_string(&log).unwrap()).unwrap();
    parsed.segments.pop();
    fs::write(&log, parsed.to_text()).unwrap();
    let o = gyrocal(&["calibrate", s(&log)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("protocol violation"));
}

#[test]
fn compare_identical_files_gives_zero() {
    let a = data("lsm9ds1_proposed.json");
    let table = cmd_compare(&a, &a, 0.03, 4).unwrap();
    assert!(table
        .rows
        .iter()
        .all(|r| r.difference == 0.0 && r.rounded == "0.0000" && !r.flagged));
    let o = gyrocal(&["compare", s(&a), s(&a)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 of 6 differences exceed 0.03"));
}

#[test]
fn compare_flags_and_emits_json() {
    let (a, b) = (
        data("lsm9ds1_proposed.json"),
        data("lsm9ds1_turntable.json"),
    );
    let o = gyrocal(&["compare", s(&a), s(&b), "--threshold", "0.025", "--json"]);
    assert!(o.status.success());
    let json: Value = serde_json::from_slice(&o.stdout).unwrap();
    let flagged: Vec<&str> = json["rows"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["flagged"] == true)
        .map(|r| r["parameter"].as_str().unwrap())
        .collect();
    assert_eq!(flagged, ["b_x", "b_y", "b_z"]);
}

#[test]
fn compare_rejects_missing_fields() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"k_x": 1.0, "k_y": 1.0, "k_z": 1.0, "b_x": 0.0, "b_y": 0.0}"#,
    )
    .unwrap();
    let o = gyrocal(&["compare", s(&data("icm20948_proposed.json")), s(&bad)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing field `b_z`"));
}

#[test]
fn verify_suites() {
    for suite in ["doe", "observability"] {
        let o = gyrocal(&["verify", "--suite", suite]);
        assert!(o.status.success(), "{suite}");
        let out = String::from_utf8_lossy(&o.stdout);
        assert!(out.contains("[PASS]") && !out.contains("[FAIL]"), "{out}");
    }
    let o = gyrocal(&["verify", "--suite", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!gyrocal(&["verify"]).status.success());
}
