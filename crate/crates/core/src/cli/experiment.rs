use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::align::{train, write_latent_csv, Model, RunMetrics, TrainConfig, Variant};
use crate::distributions::{sample_synthetic, Dataset, GaussianMixtureSpec};
use crate::error::{Error, Result};

pub const TABLE1_CSV_VERSION: &str = "# relaxalign table1 v1";
pub const RUNS_CSV_VERSION: &str = "# relaxalign table1 runs v1";

/// One `(variant, beta)` entry of the table, written `sDANN-2` or `DANN`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Cell {
    pub variant: Variant,
    pub beta: f64,
}

impl Cell {
    pub fn new(variant: Variant, beta: f64) -> Self {
        Self { variant, beta }
    }

    pub fn label(&self) -> String {
        self.variant.cell_label(self.beta)
    }
}

impl From<Cell> for String {
    fn from(c: Cell) -> String {
        c.label()
    }
}

impl TryFrom<String> for Cell {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        parse_cell(&s)
    }
}

/// `NAME` or `NAME-BETA`, e.g. `Source`, `sWDANN-0.5`.
pub fn parse_cell(s: &str) -> Result<Cell> {
    let s = s.trim();
    let (name, beta) = match s.rsplit_once('-') {
        Some((name, b)) => (name, b.parse::<f64>().map_err(|e| Error::Parse(format!("cell `{s}`: {e}")))?),
        None => (s, 0.0),
    };
    let variant: Variant = name.parse()?;
    if variant.uses_beta() && !s.contains('-') {
        return Err(Error::Parse(format!("cell `{s}` needs a beta, e.g. `{name}-2`")));
    }
    Ok(Cell::new(variant, beta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// the shifted synthetic mixture, resampled with each run's seed
    LabelShift,
    /// the balanced synthetic mixture, resampled with each run's seed
    NoShift,
    Synthetic(GaussianMixtureSpec),
    /// labeled CSV, shared by all runs
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub cells: Vec<Cell>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// dump latent, metrics and model files for every seed, not just the first
    pub all_artifacts: bool,
    /// template for every run; variant, beta and seed are set per run
    pub train: TrainConfig,
}

/// Source, DANN and WDANN, then each relaxed variant at beta 0.5, 2 and 4.
pub fn table1_cells() -> Vec<Cell> {
    let mut cells = vec![Cell::new(Variant::Source, 0.0), Cell::new(Variant::Dann, 0.0), Cell::new(Variant::Wdann, 0.0)];
    for v in [Variant::Fdann, Variant::Sdann, Variant::Wdann1, Variant::Wdann2, Variant::Swdann] {
        for beta in [0.5, 2.0, 4.0] {
            cells.push(Cell::new(v, beta));
        }
    }
    cells
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::LabelShift,
            cells: table1_cells(),
            seeds: (0..5).collect(),
            output_dir: PathBuf::from("table1_out"),
            all_artifacts: false,
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::Config("at least one cell is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        for cell in &self.cells {
            self.run_config(cell, 0).validate()?;
        }
        if let DatasetSource::Synthetic(spec) = &self.dataset {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn run_config(&self, cell: &Cell, seed: u64) -> TrainConfig {
        let mut c = self.train.clone();
        c.variant = cell.variant;
        c.beta = cell.beta;
        c.seed = seed;
        c
    }

    /// The dataset a run with `seed` trains on.
    pub fn dataset(&self, seed: u64) -> Result<Dataset> {
        match &self.dataset {
            DatasetSource::File(path) => Dataset::read_csv(std::fs::File::open(path)?),
            _ => self.dataset_for(seed, None),
        }
    }

    fn dataset_for(&self, seed: u64, shared: Option<&Dataset>) -> Result<Dataset> {
        match (&self.dataset, shared) {
            (_, Some(d)) => Ok(d.clone()),
            (DatasetSource::LabelShift, _) => sample_synthetic(&GaussianMixtureSpec::label_shift(), seed),
            (DatasetSource::NoShift, _) => sample_synthetic(&GaussianMixtureSpec::no_shift(), seed),
            (DatasetSource::Synthetic(spec), _) => sample_synthetic(spec, seed),
            (DatasetSource::File(_), None) => unreachable!("file datasets are loaded once"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub status: RunStatus,
    pub source_accuracy: Option<f64>,
    pub target_accuracy: Option<f64>,
    pub error: Option<String>,
    /// wall-clock training time; reported on screen only
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    pub runs: Vec<RunRecord>,
    pub completed: usize,
    pub failed: usize,
    /// mean and population standard deviation over completed runs
    pub target_mean: Option<f64>,
    pub target_std: Option<f64>,
    pub source_mean: Option<f64>,
    pub source_std: Option<f64>,
}

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (Some(m), Some(var.sqrt()))
}

impl CellResult {
    fn new(cell: Cell, runs: Vec<RunRecord>) -> Self {
        let ok: Vec<&RunRecord> = runs.iter().filter(|r| r.status == RunStatus::Ok).collect();
        let tgt: Vec<f64> = ok.iter().filter_map(|r| r.target_accuracy).collect();
        let src: Vec<f64> = ok.iter().filter_map(|r| r.source_accuracy).collect();
        let (target_mean, target_std) = mean_std(&tgt);
        let (source_mean, source_std) = mean_std(&src);
        Self { cell, completed: ok.len(), failed: runs.len() - ok.len(), runs, target_mean, target_std, source_mean, source_std }
    }

    /// Slowest run of the cell, in seconds.
    pub fn max_seconds(&self) -> f64 {
        self.runs.iter().map(|r| r.seconds).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{:.1}", 100.0 * v))
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

impl Table1 {
    pub fn cell(&self, cell: &str) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.cell.label() == cell)
    }

    fn entry(c: &CellResult) -> String {
        let mut s = format!("{}±{}", pct(c.target_mean), pct(c.target_std));
        if c.failed > 0 {
            s.push_str(&format!(" ({} failed)", c.failed));
        }
        s
    }

    /// Target accuracy in percent, unparameterized variants first, then one
    /// row per relaxed variant with a column per beta.
    pub fn print(&self, out: &mut dyn Write) -> Result<()> {
        writeln!(out, "target accuracy %, mean±std over {} seeds", self.config.seeds.len())?;
        for c in self.cells.iter().filter(|c| !c.cell.variant.uses_beta()) {
            writeln!(out, "{:<10} {}", c.cell.label(), Self::entry(c))?;
        }
        let mut betas: Vec<f64> = self.cells.iter().filter(|c| c.cell.variant.uses_beta()).map(|c| c.cell.beta).collect();
        betas.sort_by(f64::total_cmp);
        betas.dedup();
        if !betas.is_empty() {
            write!(out, "{:<10}", "beta")?;
            for b in &betas {
                write!(out, " {:<16}", b)?;
            }
            writeln!(out)?;
            let mut variants: Vec<Variant> = Vec::new();
            for c in self.cells.iter().filter(|c| c.cell.variant.uses_beta()) {
                if !variants.contains(&c.cell.variant) {
                    variants.push(c.cell.variant);
                }
            }
            for v in variants {
                write!(out, "{:<10}", v.name())?;
                for b in &betas {
                    let e = self.cells.iter().find(|c| c.cell.variant == v && c.cell.beta == *b).map_or("-".into(), Self::entry);
                    write!(out, " {:<16}", e)?;
                }
                writeln!(out)?;
            }
        }
        writeln!(out, "results in {}", self.config.output_dir.display())?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TABLE1_CSV_VERSION}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cell", "variant", "beta", "completed", "failed", "target_mean", "target_std", "source_mean", "source_std"])?;
        for c in &self.cells {
            w.write_record([
                c.cell.label(),
                c.cell.variant.name().to_string(),
                c.cell.beta.to_string(),
                c.completed.to_string(),
                c.failed.to_string(),
                opt(c.target_mean),
                opt(c.target_std),
                opt(c.source_mean),
                opt(c.source_std),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_runs_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{RUNS_CSV_VERSION}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cell", "seed", "status", "source_accuracy", "target_accuracy", "error"])?;
        for c in &self.cells {
            for r in &c.runs {
                let status = match r.status {
                    RunStatus::Ok => "ok",
                    RunStatus::Failed => "failed",
                };
                w.write_record([
                    c.cell.label(),
                    r.seed.to_string(),
                    status.to_string(),
                    opt(r.source_accuracy),
                    opt(r.target_accuracy),
                    r.error.clone().unwrap_or_default(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

struct Finished {
    record: RunRecord,
    artifacts: Option<(Model, RunMetrics)>,
}

fn run_one(config: &ExperimentConfig, cell: &Cell, seed: u64, shared: Option<&Dataset>, keep: bool) -> Finished {
    let start = std::time::Instant::now();
    let result = config.dataset_for(seed, shared).and_then(|data| train(config.run_config(cell, seed), &data));
    let seconds = start.elapsed().as_secs_f64();
    match result {
        Ok((model, metrics)) => Finished {
            record: RunRecord {
                seed,
                status: RunStatus::Ok,
                source_accuracy: metrics.source_accuracy(),
                target_accuracy: metrics.target_accuracy(),
                error: None,
                seconds,
            },
            artifacts: keep.then_some((model, metrics)),
        },
        Err(e) => Finished {
            record: RunRecord { seed, status: RunStatus::Failed, source_accuracy: None, target_accuracy: None, error: Some(e.to_string()), seconds },
            artifacts: None,
        },
    }
}

fn write_artifacts(dir: &Path, stem: &str, model: &Model, metrics: &RunMetrics) -> Result<()> {
    for sub in ["latent", "metrics", "models"] {
        std::fs::create_dir_all(dir.join(sub))?;
    }
    if let Some(last) = metrics.latents.last() {
        write_latent_csv(&last.points, std::io::BufWriter::new(std::fs::File::create(dir.join("latent").join(format!("{stem}.csv")))?))?;
    }
    metrics.write_steps_csv(std::io::BufWriter::new(std::fs::File::create(dir.join("metrics").join(format!("{stem}.csv")))?))?;
    model.save_json(&dir.join("models").join(format!("{stem}.json")))?;
    Ok(())
}

/// Trains every `(cell, seed)` pair on `workers` threads and writes
/// `table1.csv`, `table1.json`, `runs.csv`, plus latent, metrics and model
/// dumps for the first seed of each cell (every seed with `all_artifacts`). Failed runs are recorded, not fatal.
pub fn run_table1(config: &ExperimentConfig, workers: usize) -> Result<Table1> {
    config.validate()?;
    let shared = match &config.dataset {
        DatasetSource::File(path) => Some(Dataset::read_csv(std::fs::File::open(path)?)?),
        _ => None,
    };
    let jobs: Vec<(usize, u64)> =
        (0..config.cells.len()).flat_map(|c| config.seeds.iter().map(move |&s| (c, s))).collect();
    let slots: Mutex<Vec<Option<Finished>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(c, seed)) = jobs.get(i) else { break };
                let keep = config.all_artifacts || seed == config.seeds[0];
                let done = run_one(config, &config.cells[c], seed, shared.as_ref(), keep);
                slots.lock().expect("result lock")[i] = Some(done);
            });
        }
    });
    let mut finished: Vec<Finished> = slots.into_inner().expect("result lock").into_iter().map(|f| f.expect("job ran")).collect();

    std::fs::create_dir_all(&config.output_dir)?;
    let mut cells = Vec::with_capacity(config.cells.len());
    let per_cell = config.seeds.len();
    for (c, cell) in config.cells.iter().enumerate() {
        let mut runs = Vec::with_capacity(per_cell);
        for f in &mut finished[c * per_cell..(c + 1) * per_cell] {
            if let Some((model, metrics)) = f.artifacts.take() {
                write_artifacts(&config.output_dir, &format!("{}_seed{}", cell.label(), f.record.seed), &model, &metrics)?;
            }
            runs.push(f.record.clone());
        }
        cells.push(CellResult::new(*cell, runs));
    }
    let table = Table1 { config: config.clone(), cells };
    let dir = &config.output_dir;
    table.write_csv(std::io::BufWriter::new(std::fs::File::create(dir.join("table1.csv"))?))?;
    table.write_runs_csv(std::io::BufWriter::new(std::fs::File::create(dir.join("runs.csv"))?))?;
    std::fs::write(dir.join("table1.json"), serde_json::to_string_pretty(&table)? + "\n")?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_parse_and_print() {
        let c = parse_cell("sDANN-2").unwrap();
        assert_eq!((c.variant, c.beta), (Variant::Sdann, 2.0));
        assert_eq!(c.label(), "sDANN-2");
        assert_eq!(parse_cell("swdann-0.5").unwrap().label(), "sWDANN-0.5");
        assert_eq!(parse_cell("Source").unwrap().variant, Variant::Source);
        assert!(parse_cell("fDANN").is_err());
        assert!(parse_cell("XDANN-1").is_err());
        assert!(parse_cell("DANN-x").is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"sDANN-2\""));
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
        let small = ExperimentConfig::from_json(r#"{"cells": ["Source"], "seeds": [3], "train": {"steps": 10}}"#).unwrap();
        assert_eq!(small.cells.len(), 1);
        assert_eq!(small.train.steps, 10);
        assert!(ExperimentConfig::from_json(r#"{"cells": []}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"seeds": []}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (Some(2.0), Some(1.0)));
        assert_eq!(mean_std(&[]), (None, None));
    }
}
