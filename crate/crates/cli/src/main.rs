//! `adiaspin`: single evolutions, sweeps, Berry phases and the verification
//! suite from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 computation failure,
//! 3 verification failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{BerryJob, CliError, EvolveJob, SweepJob};
use config::{ConfigError, Settings};

#[derive(Debug, Parser)]
#[command(
    name = "adiaspin",
    version,
    about = "Spin-1/2 in a precessing field: exact, adiabatic and numerical evolution"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve one parameter point and write the coefficient time series.
    Evolve(PointArgs),
    /// Evaluate metrics over a parameter grid and fit power laws in the ratio.
    Sweep(PointArgs),
    /// Geometric phases after one drive period.
    Berry(PointArgs),
    /// Run the built-in consistency checks.
    Verify(VerifyArgs),
}

/// Every flag is optional here; values also come from `--config` and
/// `ADIASPIN_*` variables.
#[derive(Debug, Args)]
struct PointArgs {
    /// Flat key = value settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Tilt angle, e.g. 1.047 or pi/3. Comma lists and repeats allowed.
    #[arg(long, allow_hyphen_values = true)]
    theta: Vec<String>,
    /// Drive to Larmor frequency ratio ω₀/ω₁.
    #[arg(long)]
    ratio: Vec<String>,
    #[arg(long)]
    omega1: Option<String>,
    /// Tracer flags a11,a22,a. Repeat for several variants.
    #[arg(long, allow_hyphen_values = true)]
    flags: Vec<String>,
    /// exact, adiabatic, numeric or numeric-lab.
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    periods: Option<String>,
    /// Samples per drive period. By default the grid resolves the fastest
    /// phase rotation.
    #[arg(long)]
    samples: Option<String>,
    /// Output file; standard output if absent.
    #[arg(long)]
    out: Option<String>,
    /// Worker threads for sweeps, 0 for one per core.
    #[arg(long)]
    workers: Option<String>,
    /// Read angles in degrees.
    #[arg(long)]
    degrees: bool,
    /// lower, upper, or re_c1,im_c1,re_c2,im_c2.
    #[arg(long, allow_hyphen_values = true)]
    initial: Option<String>,
    /// Sweep metrics, comma separated.
    #[arg(long)]
    metrics: Vec<String>,
    /// Berry routes: adiabatic-closed-form, exact-closed-form, numeric-lab.
    #[arg(long)]
    routes: Vec<String>,
    /// Berry states: 1, 2.
    #[arg(long)]
    states: Vec<String>,
    /// Add a wall_time_s column to sweep records (breaks byte-identical
    /// output between runs).
    #[arg(long)]
    wall_time: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Also write the report here (JSON if the name ends in .json).
    #[arg(long)]
    out: Option<String>,
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

impl PointArgs {
    fn cli_settings(&self) -> Settings {
        let mut s = Settings::default();
        let mut list = |key, values: &[String], sep: &str| {
            if !values.is_empty() {
                s.set(key, values.join(sep));
            }
        };
        list("theta", &self.theta, ",");
        list("ratio", &self.ratio, ",");
        list("flags", &self.flags, ";");
        list("metrics", &self.metrics, ",");
        list("routes", &self.routes, ",");
        list("states", &self.states, ",");
        for (key, value) in [
            ("omega1", &self.omega1),
            ("solver", &self.solver),
            ("periods", &self.periods),
            ("samples", &self.samples),
            ("out", &self.out),
            ("workers", &self.workers),
            ("initial", &self.initial),
        ] {
            if let Some(v) = value {
                s.set(key, v.clone());
            }
        }
        if self.degrees {
            s.set("degrees", "true");
        }
        if self.wall_time {
            s.set("wall-time", "true");
        }
        s
    }

    /// File, then environment, then command line.
    fn settings(&self) -> Result<Settings, ConfigError> {
        let (env, env_config) = Settings::from_env(std::env::vars())?;
        let file = match self.config.clone().or(env_config) {
            Some(path) => Settings::from_file(&path)?,
            None => Settings::default(),
        };
        Ok(file.overlay(env).overlay(self.cli_settings()))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Evolve(args) => EvolveJob::prepare(&args.settings()?)?.run(),
        Command::Sweep(args) => SweepJob::prepare(&args.settings()?)?.run(),
        Command::Berry(args) => BerryJob::prepare(&args.settings()?)?.run(),
        Command::Verify(args) => {
            let fault = args
                .inject_fault
                .as_deref()
                .map(str::parse)
                .transpose()
                .map_err(|msg| ConfigError::Invalid {
                    key: "inject-fault",
                    msg,
                })?;
            commands::run_verify(fault, args.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
