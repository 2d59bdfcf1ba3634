use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use gyrocal_cli::{
    cmd_calibrate, cmd_compare, cmd_simulate, cmd_verify, render_json, SimulateArgs,
    DEFAULT_STATIC_NOISE,
};

/// Triaxial gyroscope calibration without reference equipment.
#[derive(Parser)]
#[command(name = "gyrocal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo campaign; writes replicates.csv and summary.json.
    Simulate {
        /// TOML campaign configuration; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `rng_seed` from the configuration.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the first replicate's session log here.
        #[arg(long)]
        emit_log: Option<PathBuf>,
    },
    /// Estimate scale factors and biases from a session log; prints JSON.
    Calibrate {
        log: PathBuf,
        /// Expected stationary noise, deg/s. The static stage is rejected when
        /// any axis exceeds five times this.
        #[arg(long, default_value_t = DEFAULT_STATIC_NOISE)]
        static_noise: f64,
        /// Skip the stationary-motion check.
        #[arg(long)]
        no_motion_check: bool,
    },
    /// Tabulate B − A for two parameter files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Flag differences whose magnitude exceeds this.
        #[arg(long, default_value_t = 0.03)]
        threshold: f64,
        #[arg(long, default_value_t = 4)]
        decimals: usize,
        /// Print the table as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run a self-check suite; exits non-zero if any check fails.
    Verify {
        #[arg(long, value_parser = ["doe", "observability"])]
        suite: String,
    },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            emit_log,
        } => {
            let output = cmd_simulate(&SimulateArgs {
                config: config.as_deref(),
                seed,
                out: &out,
                emit_log: emit_log.as_deref(),
            })?;
            for s in &output.levels {
                println!(
                    "noise {}: {} replicates, {} failed, {:.1}% improved",
                    s.noise_sigma,
                    s.replicates,
                    s.failures,
                    100.0 * s.improved_fraction
                );
            }
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::Calibrate {
            log,
            static_noise,
            no_motion_check,
        } => {
            let output = cmd_calibrate(&log, (!no_motion_check).then_some(static_noise))?;
            for w in &output.diagnostics.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", render_json(&output)?);
            Ok(true)
        }
        Command::Compare {
            a,
            b,
            threshold,
            decimals,
            json,
        } => {
            let table = cmd_compare(&a, &b, threshold, decimals)?;
            if json {
                print!("{}", render_json(&table)?);
            } else {
                println!("{table}");
            }
            Ok(true)
        }
        Command::Verify { suite } => {
            let report = cmd_verify(&suite)?;
            println!("{report}");
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
