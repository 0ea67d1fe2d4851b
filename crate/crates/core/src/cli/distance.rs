use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::distributions::DiscreteDistribution;
use crate::divergences::{
    dual_divergence_discrete, primal_divergence, relax, reweighted_distance_discrete, FDivergence, GeneratorFunction,
    TotalVariation,
};
use crate::error::{Error, Result};
use crate::transport::{relaxed_wasserstein_dual, relaxed_wasserstein_primal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DistanceFamily {
    /// relaxed f-divergence
    Fdiv,
    /// relaxed Wasserstein distance
    Wasserstein,
    /// reweighted base distance, `tv` or an f-divergence
    Reweight,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceReport {
    pub family: DistanceFamily,
    pub beta: f64,
    pub base: String,
    pub primal: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    /// minimizing reweighted source masses, reweight family only
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reweighted: Option<Vec<f64>>,
}

impl DistanceReport {
    pub fn print(&self, out: &mut dyn Write) -> Result<()> {
        writeln!(out, "primal {}", self.primal)?;
        if let (Some(d), Some(g)) = (self.dual, self.gap) {
            writeln!(out, "dual {d}")?;
            writeln!(out, "gap {g}")?;
        }
        Ok(())
    }
}

/// CSV with one atom per row: coordinates then mass. Lines starting with `#`
/// are comments; a first row that does not parse as numbers is a header.
pub fn read_distribution_csv<R: Read>(input: R) -> Result<DiscreteDistribution> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
    let mut points = Vec::new();
    let mut mass = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::Parse(format!("row {}: need coordinates and a mass", i + 1)));
        }
        let values: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match values {
            Ok(mut v) => {
                mass.push(v.pop().expect("at least two fields"));
                points.push(v);
            }
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("row {}: {e}", i + 1))),
        }
    }
    DiscreteDistribution::new(points, Some(&mass))
}

fn read_file(path: &Path) -> Result<DiscreteDistribution> {
    let file = std::fs::File::open(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    read_distribution_csv(file).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub(crate) fn cmd_distance(p: &Path, q: &Path, family: DistanceFamily, beta: f64, base: &str) -> Result<DistanceReport> {
    let p = read_file(p)?;
    let q = read_file(q)?;
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: q.dim() });
    }
    let base = base.to_ascii_lowercase();
    let report = |primal: f64, dual: Option<f64>, reweighted| DistanceReport {
        family,
        beta,
        base: base.clone(),
        primal,
        dual,
        gap: dual.map(|d| (primal - d).abs()),
        reweighted,
    };
    Ok(match family {
        DistanceFamily::Fdiv => {
            let gen = relax(base.parse::<GeneratorFunction>()?, beta)?;
            report(primal_divergence(&gen, &p, &q)?, Some(dual_divergence_discrete(&gen, &p, &q)?), None)
        }
        DistanceFamily::Wasserstein => {
            let (primal, _) = relaxed_wasserstein_primal(&p, &q, beta)?;
            let (dual, _) = relaxed_wasserstein_dual(&p, &q, beta)?;
            report(primal, Some(dual), None)
        }
        DistanceFamily::Reweight => {
            let r = if base == "tv" {
                reweighted_distance_discrete(&TotalVariation, &p, &q, beta)?
            } else {
                reweighted_distance_discrete(&FDivergence(base.parse::<GeneratorFunction>()?), &p, &q, beta)?
            };
            report(r.value, None, Some(r.reweighted))
        }
    })
}
