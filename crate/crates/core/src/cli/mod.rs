//! Command-line front end: `distance`, `table1`, `theory` and `audit`.
//!
//! Every command writes its report to the given writer and returns an exit
//! code: 0 on success, 1 when a check fails, 2 on usage, parse, config or IO
//! errors.

mod distance;
mod experiment;
mod theory;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use distance::{read_distribution_csv, DistanceFamily, DistanceReport};
pub use experiment::{
    parse_cell, run_table1, table1_cells, Cell, CellResult, DatasetSource, ExperimentConfig, RunRecord, RunStatus, Table1,
    TABLE1_CSV_VERSION, RUNS_CSV_VERSION,
};
pub use theory::{rho_grid, run_theory, Prop1Row, TheoryReport};

use crate::distributions::{sample_synthetic, Dataset, GaussianMixtureSpec};
use crate::error::{Error, Result};

/// Environment variable holding the number of worker threads.
pub const WORKERS_ENV: &str = "RELAXALIGN_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Worker count from `RELAXALIGN_WORKERS`, else the available parallelism.
pub fn worker_count() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

#[derive(Debug, Parser)]
#[command(name = "relaxalign", version, about = "Relaxed distribution alignment under label shift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// balanced source, 10%/90% target
    LabelShift,
    /// balanced source and target
    NoShift,
}

impl Preset {
    pub fn spec(self) -> GaussianMixtureSpec {
        match self {
            Preset::LabelShift => GaussianMixtureSpec::label_shift(),
            Preset::NoShift => GaussianMixtureSpec::no_shift(),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Distance between two discrete distributions given as CSV (coords..., mass).
    Distance {
        /// target-side distribution `p`
        p: PathBuf,
        /// source-side distribution `q`
        q: PathBuf,
        #[arg(long, value_enum, default_value = "fdiv")]
        family: DistanceFamily,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        /// generator of the f-divergence (gan or kl)
        #[arg(long, default_value = "gan")]
        generator: String,
        /// write the JSON report here instead of stdout
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Train the variant grid over several seeds and tabulate target accuracy.
    Table1 {
        /// JSON experiment config; flags below override its fields
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// comma-separated cells such as `Source,DANN,sDANN-2`
        #[arg(long)]
        cells: Option<String>,
        /// number of seeds, 0..n
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// labeled dataset CSV instead of synthetic data
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Lower-bound grid, the zero-error construction and an optional audit.
    Theory {
        /// trained model checkpoint to audit
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// labeled dataset CSV for the checkpoint audit
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "label-shift")]
        preset: Preset,
        #[arg(long, default_value_t = 0)]
        data_seed: u64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Estimate the target-error bound of a trained checkpoint.
    Audit {
        checkpoint: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "label-shift")]
        preset: Preset,
        #[arg(long, default_value_t = 0)]
        data_seed: u64,
        /// JSON audit parameters
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

/// Dataset from a CSV file, or sampled from a preset.
pub fn load_dataset(file: Option<&PathBuf>, preset: Preset, seed: u64) -> Result<Dataset> {
    match file {
        Some(path) => Dataset::read_csv(std::fs::File::open(path)?),
        None => sample_synthetic(&preset.spec(), seed),
    }
}

fn write_json<T: serde::Serialize>(value: &T, path: Option<&PathBuf>, out: &mut dyn Write) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => writeln!(out, "{text}")?,
    }
    Ok(())
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Distance { p, q, family, beta, generator, json } => {
            let report = distance::cmd_distance(&p, &q, family, beta, &generator)?;
            report.print(out)?;
            write_json(&report, json.as_ref(), out)?;
            Ok(EXIT_OK)
        }
        Command::Table1 { config, output_dir, cells, seeds, steps, preset, data } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?,
                None => ExperimentConfig::default(),
            };
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            if let Some(list) = cells {
                cfg.cells = list.split(',').filter(|s| !s.trim().is_empty()).map(parse_cell).collect::<Result<_>>()?;
            }
            if let Some(n) = seeds {
                cfg.seeds = (0..n).collect();
            }
            if let Some(n) = steps {
                cfg.train.steps = n;
            }
            if let Some(p) = preset {
                cfg.dataset = match p {
                    Preset::LabelShift => DatasetSource::LabelShift,
                    Preset::NoShift => DatasetSource::NoShift,
                };
            }
            if let Some(path) = data {
                cfg.dataset = DatasetSource::File(path);
            }
            let table = run_table1(&cfg, worker_count()?)?;
            table.print(out)?;
            Ok(EXIT_OK)
        }
        Command::Theory { checkpoint, data, preset, data_seed, json } => {
            let audit_input = match checkpoint {
                Some(path) => Some((crate::align::Model::load_json(&path)?, load_dataset(data.as_ref(), preset, data_seed)?)),
                None => None,
            };
            let report = run_theory(audit_input.as_ref().map(|(m, d)| (m, d)))?;
            report.print(out)?;
            if let Some(path) = json.as_ref() {
                write_json(&report, Some(path), out)?;
            }
            Ok(if report.analytic_passed { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Audit { checkpoint, data, preset, data_seed, params, json } => {
            let model = crate::align::Model::load_json(&checkpoint)?;
            let data = load_dataset(data.as_ref(), preset, data_seed)?;
            let params: crate::theory::AuditParams = match params {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
                None => Default::default(),
            };
            let audit = crate::theory::audit_bound(&model, &data, &params)?;
            write_json(&audit, json.as_ref(), out)?;
            Ok(if audit.is_consistent() { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
    }
}

/// Parses `args` (program name first) and runs the command, writing reports to
/// `out` and diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if code == EXIT_OK { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}
