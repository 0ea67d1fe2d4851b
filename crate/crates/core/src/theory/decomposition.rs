use serde::{Deserialize, Serialize};

use super::knn::knn_label_vote;
use crate::align::{predict_label, EncodedClassifier};
use crate::distributions::{Dataset, Domain};
use crate::error::{Error, Result};

/// How the latent labeling functions `f_U(z)` are estimated at sample points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelEstimate {
    /// vote among the `k` nearest same-domain encodings (the point excluded)
    Knn(usize),
    /// the sample's own label at its own domain's points; source votes at
    /// target points still use `k` neighbors
    TrueLabels(usize),
}

impl LabelEstimate {
    fn k(self) -> usize {
        match self {
            LabelEstimate::Knn(k) | LabelEstimate::TrueLabels(k) => k,
        }
    }
}

/// Empirical form of
/// `E_T = E_S + int p_T (r_T - r_S) + int (p_T - p_S) r_S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskDecomposition {
    /// `mean_S r_S`
    pub source_term: f64,
    /// `mean_T (r_T - r_S)`
    pub labeling_term: f64,
    /// `mean_T r_S - mean_S r_S`
    pub alignment_term: f64,
    /// sum of the three terms
    pub total: f64,
    /// directly measured 0-1 target error
    pub measured_target_error: f64,
    /// `mean_T |f_T_hat - y|`, which bounds `|total - measured_target_error|`
    pub tolerance: f64,
}

pub fn risk_decomposition<M: EncodedClassifier + ?Sized>(model: &M, data: &Dataset, estimate: LabelEstimate) -> Result<RiskDecomposition> {
    let k = estimate.k();
    let ns = data.count(Domain::Source);
    let nt = data.count(Domain::Target);
    if ns == 0 || nt == 0 {
        return Err(Error::EmptySupport);
    }
    if k == 0 || k >= ns.min(nt) {
        return Err(Error::InvalidSpec(format!("k = {k} needs more than k samples per domain ({ns}, {nt})")));
    }
    let zs = model.encode(&data.features(Domain::Source))?;
    let zt = model.encode(&data.features(Domain::Target))?;
    let ys = data.labels(Domain::Source);
    let yt = data.labels(Domain::Target);
    let hs: Vec<f64> = model.classify_latent(&zs)?.into_iter().map(|p| f64::from(predict_label(p))).collect();
    let ht: Vec<f64> = model.classify_latent(&zt)?.into_iter().map(|p| f64::from(predict_label(p))).collect();

    let (fs_at_s, ft_at_t) = match estimate {
        LabelEstimate::Knn(k) => (knn_label_vote(&zs, &zs, &ys, k, true)?, knn_label_vote(&zt, &zt, &yt, k, true)?),
        LabelEstimate::TrueLabels(_) => (ys.iter().map(|&y| f64::from(y)).collect(), yt.iter().map(|&y| f64::from(y)).collect()),
    };
    let fs_at_t = knn_label_vote(&zt, &zs, &ys, k, false)?;

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let rs_s: Vec<f64> = hs.iter().zip(&fs_at_s).map(|(h, f)| (h - f).abs()).collect();
    let rt_t: Vec<f64> = ht.iter().zip(&ft_at_t).map(|(h, f)| (h - f).abs()).collect();
    let rs_t: Vec<f64> = ht.iter().zip(&fs_at_t).map(|(h, f)| (h - f).abs()).collect();

    let source_term = mean(&rs_s);
    let diff: Vec<f64> = rt_t.iter().zip(&rs_t).map(|(a, b)| a - b).collect();
    let labeling_term = mean(&diff);
    let alignment_term = mean(&rs_t) - source_term;
    let total = source_term + labeling_term + alignment_term;
    let mistakes = ht.iter().zip(&yt).filter(|(h, y)| **h != f64::from(**y)).count();
    let measured_target_error = mistakes as f64 / nt as f64;
    let gaps: Vec<f64> = ft_at_t.iter().zip(&yt).map(|(f, y)| (f - f64::from(*y)).abs()).collect();
    let tolerance = mean(&gaps);
    Ok(RiskDecomposition { source_term, labeling_term, alignment_term, total, measured_target_error, tolerance })
}
