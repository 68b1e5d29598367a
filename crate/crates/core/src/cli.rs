//! Command-line front end: parse a configuration, run one pipeline stage and
//! write its CSV artifacts.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid configuration, 3 numerical
//! failure.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use thiserror::Error;

use crate::model::{load_spec, validate_spec, ModelError, ValidatedSpec};
use crate::report;
use crate::riccati::{solve_riccati, RiccatiError, RiccatiSolution};
use crate::simulator::{
    compare_baselines, monte_carlo, rollout, GaussianNoise, NoiseFactors, SimError,
};
use crate::switching_dp::{backward_induction, DpError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Cost matrices and gains per stage -> riccati.csv
    Riccati,
    /// Per-node values and decisions -> values.csv
    Values,
    /// Equilibrium switching schedule from the initial node -> schedule.csv
    Schedule,
    /// Monte Carlo roll-outs -> trajectory.csv, summary.csv
    Simulate,
    /// Equilibrium vs never-close baseline -> compare.csv
    Compare,
    /// Social loss per node -> values.csv with k, age, poa
    Poa,
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "switchgame",
    about = "Solve and simulate switched two-player LQ games"
)]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON game configuration
    #[arg(long = "config")]
    pub config_path: PathBuf,
    /// Base seed; run r draws from stream r
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo roll-outs (at least 2)
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(2..))]
    pub runs: u64,
    /// Directory for the CSV files, created if missing
    #[arg(long = "output", default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: cannot read {path}: {source}")]
    ReadConfig {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("riccati: {0}")]
    Riccati(#[from] RiccatiError),
    #[error("switching: {0}")]
    Dp(#[from] DpError),
    #[error("simulator: {0}")]
    Sim(#[from] SimError),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("output: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ReadConfig { .. } | CliError::Model(_) => EXIT_VALIDATION,
            CliError::Sim(SimError::TooFewRuns(_)) => EXIT_USAGE,
            _ => EXIT_NUMERICAL,
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn load(path: &Path) -> Result<(ValidatedSpec, RiccatiSolution), CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
        path: path.to_path_buf(),
        source,
    })?;
    let spec = validate_spec(load_spec(&text)?)?;
    let ric = solve_riccati(&spec)?;
    Ok((spec, ric))
}

/// Runs a parsed configuration, returning the paths written.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let (spec, ric) = load(&cfg.config_path)?;
    fs::create_dir_all(&cfg.output_dir)?;
    let dir = cfg.output_dir.as_path();
    let runs = cfg.runs as usize;
    let written: Vec<&str> = match cfg.command {
        Command::Riccati => {
            report::write_riccati(create(dir, "riccati.csv")?, &ric)?;
            vec!["riccati.csv"]
        }
        Command::Values => {
            let (tables, _) = backward_induction(&spec, &ric)?;
            report::write_values(create(dir, "values.csv")?, &tables)?;
            vec!["values.csv"]
        }
        Command::Poa => {
            let (tables, _) = backward_induction(&spec, &ric)?;
            report::write_poa(create(dir, "values.csv")?, &tables)?;
            vec!["values.csv"]
        }
        Command::Schedule => {
            let (_, policy) = backward_induction(&spec, &ric)?;
            report::write_schedule(create(dir, "schedule.csv")?, &policy.replay())?;
            vec!["schedule.csv"]
        }
        Command::Simulate => {
            let (_, policy) = backward_induction(&spec, &ric)?;
            let summary = monte_carlo(&spec, &ric, &policy, cfg.seed, runs)?;
            let factors = NoiseFactors::new(&spec);
            let first = rollout(
                &spec,
                &ric,
                &policy,
                &mut GaussianNoise::new(&factors, cfg.seed, 0),
            )?;
            report::write_trajectory(create(dir, "trajectory.csv")?, &first)?;
            report::write_summary(create(dir, "summary.csv")?, &summary)?;
            vec!["trajectory.csv", "summary.csv"]
        }
        Command::Compare => {
            let cmp = compare_baselines(&spec, &ric, cfg.seed, runs)?;
            report::write_compare(create(dir, "compare.csv")?, &cmp)?;
            vec!["compare.csv"]
        }
    };
    Ok(written.into_iter().map(|f| dir.join(f)).collect())
}

/// Parses `args` (including the program name) and runs them. Diagnostics go
/// to stderr as a single line.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cfg) {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
