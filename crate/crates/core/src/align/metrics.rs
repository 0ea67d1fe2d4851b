use std::io::Write;

use serde::{Deserialize, Serialize};

use super::model::{Evaluation, LatentPoint};
use crate::error::{Error, Result};

pub const METRICS_CSV_VERSION: &str = "# relaxalign run metrics v1";
pub const LATENT_CSV_VERSION: &str = "# relaxalign latent v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    /// cross-entropy on the source batch
    pub source_loss: f64,
    /// critic objective seen by the encoder; 0 for source-only training
    pub distance: f64,
    /// last critic loss (negated objective plus penalty)
    pub critic_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSnapshot {
    pub step: usize,
    pub points: Vec<LatentPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub steps: Vec<StepMetrics>,
    pub evaluation: Option<Evaluation>,
    pub latents: Vec<LatentSnapshot>,
}

/// JSON summary of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub source_accuracy: f64,
    pub target_accuracy: f64,
    pub final_source_loss: f64,
    pub final_distance: f64,
}

impl RunMetrics {
    pub fn source_accuracy(&self) -> Option<f64> {
        self.evaluation.map(|e| e.source.accuracy)
    }

    pub fn target_accuracy(&self) -> Option<f64> {
        self.evaluation.map(|e| e.target.accuracy)
    }

    pub fn summary(&self) -> Result<RunSummary> {
        let e = self.evaluation.ok_or_else(|| Error::Undefined("run has not been evaluated".into()))?;
        let last = self.steps.last();
        Ok(RunSummary {
            steps: last.map_or(0, |s| s.step),
            source_accuracy: e.source.accuracy,
            target_accuracy: e.target.accuracy,
            final_source_loss: last.map_or(f64::NAN, |s| s.source_loss),
            final_distance: last.map_or(f64::NAN, |s| s.distance),
        })
    }

    pub fn write_steps_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{METRICS_CSV_VERSION}")?;
        let mut w = csv::Writer::from_writer(out);
        for s in &self.steps {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Latent points as CSV with columns `x1..xd,label,domain`.
pub fn write_latent_csv<W: Write>(points: &[LatentPoint], mut out: W) -> Result<()> {
    writeln!(out, "{LATENT_CSV_VERSION}")?;
    let d = points.first().map_or(2, |p| p.z.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    header.push("label".into());
    header.push("domain".into());
    w.write_record(&header)?;
    for p in points {
        let mut rec: Vec<String> = p.z.iter().map(|v| v.to_string()).collect();
        rec.push(p.label.to_string());
        rec.push(p.domain.as_str().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
