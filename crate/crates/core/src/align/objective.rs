use std::rc::Rc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::Variant;
use crate::autodiff::{softplus, Graph, Var};
use crate::divergences::sort_reweight;
use crate::error::{Error, Result};

/// Objective pieces of one adversarial evaluation. The critic maximizes
/// `critic_objective`; the encoder minimizes `encoder_objective` (scaled by
/// the distance weight), which for every variant is the same quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceTerms {
    pub critic_objective: f64,
    pub encoder_objective: f64,
    /// weights of the source samples in the source average
    pub source_weights: Vec<f64>,
}

fn source_scale(variant: Variant, beta: f64) -> f64 {
    match variant {
        Variant::Wdann1 | Variant::Wdann2 => 1.0 + beta,
        _ => 1.0,
    }
}

/// Per-sample source contribution to the critic objective, from critic outputs.
fn source_term(variant: Variant, beta: f64, g: f64) -> f64 {
    match variant {
        Variant::Dann | Variant::Sdann => g.ln(),
        Variant::Fdann => (g / (2.0 + beta)).ln(),
        _ => -source_scale(variant, beta) * g,
    }
}

fn target_term(variant: Variant, beta: f64, g: f64) -> f64 {
    match variant {
        Variant::Dann | Variant::Sdann => (-g).ln_1p(),
        Variant::Fdann => (-g / (2.0 + beta)).ln_1p(),
        _ => g,
    }
}

fn check_outputs(variant: Variant, gs: &[f64]) -> Result<()> {
    let (ok, range): (fn(f64) -> bool, &'static str) = match variant {
        Variant::Dann | Variant::Sdann => (|g| g > 0.0 && g < 1.0, "(0, 1)"),
        Variant::Fdann => (|g| g > 0.0 && g <= 1.0, "(0, 1]"),
        Variant::Wdann1 | Variant::Wdann2 => (|g| g >= 0.0 && g.is_finite(), "[0, inf)"),
        _ => (f64::is_finite, "finite"),
    };
    match gs.iter().find(|g| !ok(**g)) {
        Some(&value) => Err(Error::OutOfRange { value, range }),
        None => Ok(()),
    }
}

/// Weights of the source samples: all ones, or the sorting rule keeping the
/// `ceil(n/(1+beta))` samples with the smallest contribution to the critic
/// objective.
pub(crate) fn source_weights(variant: Variant, beta: f64, contributions: &[f64]) -> Result<Vec<f64>> {
    if variant.is_sorted() {
        let scores: Vec<f64> = contributions.iter().map(|c| -c).collect();
        Ok(sort_reweight(&scores, beta)?.weights)
    } else {
        Ok(vec![1.0; contributions.len()])
    }
}

/// Critic-objective pieces for `variant` given critic outputs (after the
/// output activation) on source and target encodings.
pub fn variant_distance_term(variant: Variant, g_source: &[f64], g_target: &[f64], beta: f64) -> Result<DistanceTerms> {
    if !variant.is_adversarial() {
        return Err(Error::InvalidSpec("Source has no distance term".into()));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidBeta(beta));
    }
    if g_source.is_empty() || g_target.is_empty() {
        return Err(Error::EmptySupport);
    }
    check_outputs(variant, g_source)?;
    check_outputs(variant, g_target)?;
    let contrib: Vec<f64> = g_source.iter().map(|&g| source_term(variant, beta, g)).collect();
    let weights = source_weights(variant, beta, &contrib)?;
    let total: f64 = weights.iter().sum();
    let src = contrib.iter().zip(&weights).map(|(c, w)| c * w).sum::<f64>() / total;
    let tgt = g_target.iter().map(|&g| target_term(variant, beta, g)).sum::<f64>() / g_target.len() as f64;
    let value = src + tgt;
    Ok(DistanceTerms { critic_objective: value, encoder_objective: value, source_weights: weights })
}

/// Critic output nodes on a source and a target batch.
pub(crate) struct CriticNodes {
    pub logits_s: Var,
    pub out_s: Var,
    pub logits_t: Var,
    pub out_t: Var,
}

/// Per-sample source contributions from graph values.
fn graph_contributions(g: &Graph, variant: Variant, beta: f64, nodes: &CriticNodes) -> Vec<f64> {
    match variant {
        Variant::Dann | Variant::Sdann => g.value(nodes.logits_s).iter().map(|&a| -softplus(-a)).collect(),
        _ => g.value(nodes.out_s).iter().map(|&v| source_term(variant, beta, v)).collect(),
    }
}

/// Builds the critic objective on the tape. Returns the objective node and
/// the source weights used.
pub(crate) fn objective_graph(g: &mut Graph, variant: Variant, beta: f64, nodes: &CriticNodes) -> Result<(Var, Vec<f64>)> {
    let contrib = graph_contributions(g, variant, beta, nodes);
    let weights = source_weights(variant, beta, &contrib)?;
    let w = Rc::new(weights.clone());
    let obj = match variant {
        Variant::Dann | Variant::Sdann => {
            let ls = g.log_sigmoid(nodes.logits_s);
            let src = g.weighted_mean(ls, w)?;
            let neg = g.scale(nodes.logits_t, -1.0);
            let lt = g.log_sigmoid(neg);
            let tgt = g.mean(lt);
            g.add(src, tgt)?
        }
        Variant::Fdann => {
            let ls = g.log_sigmoid(nodes.logits_s);
            let ms = g.weighted_mean(ls, w)?;
            let src = g.add_scalar(ms, -(2.0 + beta).ln());
            let shrunk = g.scale(nodes.out_t, -1.0 / (2.0 + beta));
            let one_minus = g.add_scalar(shrunk, 1.0);
            let lt = g.log(one_minus);
            let tgt = g.mean(lt);
            g.add(src, tgt)?
        }
        Variant::Wdann | Variant::Wdann1 | Variant::Wdann2 | Variant::Swdann => {
            let tgt = g.mean(nodes.out_t);
            let ms = g.weighted_mean(nodes.out_s, w)?;
            let src = g.scale(ms, source_scale(variant, beta));
            g.sub(tgt, src)?
        }
        Variant::Source => return Err(Error::InvalidSpec("Source has no distance term".into())),
    };
    Ok((obj, weights))
}

/// Binary cross-entropy from logits, `mean(softplus(a) - y a)`.
pub(crate) fn cross_entropy_graph(g: &mut Graph, logits: Var, labels: &Array2<f64>) -> Result<Var> {
    let y = g.constant(labels.clone());
    let sp = g.softplus(logits);
    let ya = g.mul(y, logits)?;
    let per = g.sub(sp, ya)?;
    Ok(g.mean(per))
}
