use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::knn::{dist, knn_density_ratio, nearest};
use crate::align::{evaluate, EncodedClassifier};
use crate::distributions::{Dataset, Domain};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditParams {
    /// neighbors of the density-ratio estimate
    pub k: usize,
    /// candidate values of `beta`
    pub beta_grid: Vec<f64>,
    /// input-space neighbors per sample in the Lipschitz estimate
    pub lipschitz_neighbors: usize,
    /// additional random pairs in the Lipschitz estimate
    pub lipschitz_pairs: usize,
    /// candidate fractions of source samples dropped as margin violators
    pub delta2_quantiles: Vec<f64>,
    /// failure probability of the estimation slack
    pub confidence: f64,
    pub seed: u64,
}

impl Default for AuditParams {
    fn default() -> Self {
        Self {
            k: 10,
            beta_grid: vec![0.0, 0.25, 0.5, 0.8, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0],
            lipschitz_neighbors: 5,
            lipschitz_pairs: 5000,
            delta2_quantiles: vec![0.0, 0.01, 0.05],
            confidence: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditStatus {
    /// the bound covers the measured target error up to the slack
    Consistent,
    /// the bound falls below the measured error by more than the slack; this
    /// indicates an estimator failure, not a counterexample
    EstimatorFailure,
    /// no positive separation margin, so the bound does not apply
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundAudit {
    /// empirical Lipschitz constant; a lower bound on the true one
    pub lipschitz: f64,
    pub beta: f64,
    pub delta1: f64,
    /// `(beta, delta1)` over the whole grid
    pub delta1_curve: Vec<(f64, f64)>,
    /// separation margin of the kept source encodings
    pub margin: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub source_error: f64,
    pub measured_target_error: f64,
    /// `(1+beta) E_S + 3 delta1 + 2 (1+beta) delta2 + delta3`, absent when
    /// the margin is zero
    pub bound_value: Option<f64>,
    pub estimation_slack: f64,
    pub status: AuditStatus,
}

impl BoundAudit {
    /// `bound_value >= measured - slack`, vacuously true when inapplicable.
    pub fn is_consistent(&self) -> bool {
        self.status != AuditStatus::EstimatorFailure
    }
}

/// `(1+beta) E_S + 3 delta1 + 2 (1+beta) delta2 + delta3`.
pub fn theorem_bound(beta: f64, source_error: f64, delta1: f64, delta2: f64, delta3: f64) -> f64 {
    (1.0 + beta) * source_error + 3.0 * delta1 + 2.0 * (1.0 + beta) * delta2 + delta3
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn row_ratio(x: &Array2<f64>, z: &Array2<f64>, i: usize, j: usize) -> Option<f64> {
    let dx = dist(x.row(i), x.row(j));
    (dx > 0.0).then(|| dist(z.row(i), z.row(j)) / dx)
}

fn lipschitz_estimate(x: &Array2<f64>, z: &Array2<f64>, params: &AuditParams) -> Result<f64> {
    let n = x.nrows();
    let mut best: f64 = 0.0;
    if params.lipschitz_neighbors > 0 && n > params.lipschitz_neighbors {
        for (i, row) in nearest(x, x, params.lipschitz_neighbors, true)?.iter().enumerate() {
            for &(_, j) in row {
                if let Some(r) = row_ratio(x, z, i, j) {
                    best = best.max(r);
                }
            }
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
    for _ in 0..params.lipschitz_pairs {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if let Some(r) = row_ratio(x, z, i, j) {
            best = best.max(r);
        }
    }
    Ok(best)
}

/// Minimum latent distance between kept source encodings of opposite labels.
fn cross_margin(z: &Array2<f64>, labels: &[u8], keep: &[bool]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..z.nrows() {
        if !keep[i] || labels[i] != 0 {
            continue;
        }
        for j in 0..z.nrows() {
            if keep[j] && labels[j] == 1 {
                best = best.min(dist(z.row(i), z.row(j)));
            }
        }
    }
    best
}

/// Picks `(delta2, margin, kept)` maximizing `margin (1 - delta2)`.
fn separation(zs: &Array2<f64>, ys: &[u8], quantiles: &[f64]) -> (f64, f64, Vec<bool>) {
    let n = zs.nrows();
    // each sample's distance to the nearest opposite-label encoding
    let own_margin: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| ys[j] != ys[i])
                .map(|j| dist(zs.row(i), zs.row(j)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| own_margin[a].total_cmp(&own_margin[b]).then(a.cmp(&b)));
    let mut best: Option<(f64, f64, Vec<bool>)> = None;
    for &q in quantiles {
        let drop = ((q * n as f64).floor() as usize).min(n);
        let mut keep = vec![true; n];
        for &i in &order[..drop] {
            keep[i] = false;
        }
        let delta2 = drop as f64 / n as f64;
        let mut margin = cross_margin(zs, ys, &keep);
        if !margin.is_finite() {
            // only one label left among the kept samples
            margin = 0.0;
        }
        let score = margin * (1.0 - delta2);
        if best.as_ref().is_none_or(|b| score > b.1 * (1.0 - b.0)) {
            best = Some((delta2, margin, keep));
        }
    }
    best.unwrap_or((0.0, 0.0, vec![true; n]))
}

/// Target mass not linked to the kept source support by a label-consistent
/// chain: target samples are joined when closer than `radius`, and a target
/// point `x` is covered when its component holds a target point of the same
/// label lying within `radius` of a kept source sample of that label.
fn unanchored_target_mass(xt: &Array2<f64>, yt: &[u8], xs: &Array2<f64>, ys: &[u8], keep: &[bool], radius: f64) -> f64 {
    let nt = xt.nrows();
    let mut uf = UnionFind::new(nt);
    for i in 0..nt {
        for j in (i + 1)..nt {
            if dist(xt.row(i), xt.row(j)) < radius {
                uf.union(i, j);
            }
        }
    }
    let mut anchors = std::collections::HashSet::<(usize, u8)>::new();
    for i in 0..nt {
        let touches = (0..xs.nrows()).any(|j| keep[j] && ys[j] == yt[i] && dist(xt.row(i), xs.row(j)) < radius);
        if touches {
            anchors.insert((uf.find(i), yt[i]));
        }
    }
    let missing = (0..nt).filter(|&i| !anchors.contains(&(uf.find(i), yt[i]))).count();
    missing as f64 / nt as f64
}

/// Estimates every constant of the target-error bound from labeled samples
/// and compares the bound with the measured target error.
pub fn audit_bound<M: EncodedClassifier + ?Sized>(model: &M, data: &Dataset, params: &AuditParams) -> Result<BoundAudit> {
    if params.beta_grid.is_empty() || params.beta_grid.iter().any(|b| !(*b >= 0.0)) {
        return Err(Error::Config("beta grid must be non-empty and non-negative".into()));
    }
    if !(params.confidence > 0.0 && params.confidence < 1.0) {
        return Err(Error::Config("confidence must lie in (0, 1)".into()));
    }
    let xs = data.features(Domain::Source);
    let xt = data.features(Domain::Target);
    let ys = data.labels(Domain::Source);
    let yt = data.labels(Domain::Target);
    if xs.nrows() <= params.k || xt.nrows() <= params.k {
        return Err(Error::InvalidSpec(format!("k = {} needs more samples per domain", params.k)));
    }
    let zs = model.encode(&xs)?;
    let zt = model.encode(&xt)?;

    let x_all = ndarray::concatenate(ndarray::Axis(0), &[xs.view(), xt.view()]).map_err(|e| Error::Shape(e.to_string()))?;
    let z_all = ndarray::concatenate(ndarray::Axis(0), &[zs.view(), zt.view()]).map_err(|e| Error::Shape(e.to_string()))?;
    let lipschitz = lipschitz_estimate(&x_all, &z_all, params)?;

    let ratio = knn_density_ratio(&zt, &zs, params.k)?;
    let mut grid = params.beta_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let delta1_curve: Vec<(f64, f64)> = grid
        .iter()
        .map(|&b| (b, ratio.iter().filter(|r| **r > 1.0 + b).count() as f64 / ratio.len() as f64))
        .collect();

    let (delta2, margin, keep) = separation(&zs, &ys, &params.delta2_quantiles);
    let delta3 = if margin > 0.0 && lipschitz > 0.0 {
        unanchored_target_mass(&xt, &yt, &xs, &ys, &keep, margin / lipschitz)
    } else {
        1.0
    };

    let eval = evaluate(model, data)?;
    let (es, et) = (eval.source.error, eval.target.error);
    let (beta, delta1, bound) = delta1_curve
        .iter()
        .map(|&(b, d1)| (b, d1, theorem_bound(b, es, d1, delta2, delta3)))
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .expect("non-empty grid");

    // Hoeffding slack for each empirical mass at the chosen beta
    let hoeffding = |n: usize| ((2.0 / params.confidence).ln() / (2.0 * n as f64)).sqrt();
    let (eps_s, eps_t) = (hoeffding(xs.nrows()), hoeffding(xt.nrows()));
    let estimation_slack = (1.0 + beta) * eps_s + 3.0 * eps_t + 2.0 * (1.0 + beta) * eps_s + eps_t + eps_t;

    let (bound_value, status) = if margin > 0.0 {
        let status = if bound >= et - estimation_slack { AuditStatus::Consistent } else { AuditStatus::EstimatorFailure };
        (Some(bound), status)
    } else {
        (None, AuditStatus::Inapplicable)
    };
    Ok(BoundAudit {
        lipschitz,
        beta,
        delta1,
        delta1_curve,
        margin,
        delta2,
        delta3,
        source_error: es,
        measured_target_error: et,
        bound_value,
        estimation_slack,
        status,
    })
}
