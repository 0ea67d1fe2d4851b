use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{TrainConfig, Variant};
use crate::autodiff::{Activation, DenseNetwork};
use crate::distributions::{Dataset, Domain};
use crate::error::{Error, Result};

/// Anything that maps inputs to a latent space and classifies latents.
pub trait EncodedClassifier {
    fn encode(&self, x: &Array2<f64>) -> Result<Array2<f64>>;
    /// `P(y = 1 | z)` for each latent row.
    fn classify_latent(&self, z: &Array2<f64>) -> Result<Vec<f64>>;

    fn predict_proba(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        self.classify_latent(&self.encode(x)?)
    }
}

/// Hard prediction from a probability; 0.5 maps to class 1.
pub fn predict_label(p: f64) -> u8 {
    u8::from(p >= 0.5)
}

/// Encoder, prediction head and critic of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub variant: Variant,
    pub beta: f64,
    pub encoder: DenseNetwork,
    pub head: DenseNetwork,
    pub critic: DenseNetwork,
}

/// Initial output bias of critics with a ReLU or softplus output.
pub const NON_NEGATIVE_CRITIC_BIAS: f64 = 1.0;

impl Model {
    pub fn new(config: &TrainConfig, input_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        let hidden = config.hidden_activation;
        let mut enc_widths = vec![input_dim];
        enc_widths.extend(&config.encoder_hidden);
        enc_widths.push(config.latent_dim);
        let encoder = DenseNetwork::with_rng(&enc_widths, hidden, hidden, rng)?;
        let head = DenseNetwork::with_rng(&[config.latent_dim, 1], hidden, Activation::Sigmoid, rng)?;
        let mut critic_widths = vec![config.latent_dim];
        critic_widths.extend(&config.critic_hidden);
        critic_widths.push(1);
        let mut critic = DenseNetwork::with_rng(&critic_widths, config.critic_activation, config.variant.critic_output(), rng)?;
        if matches!(config.variant.critic_output(), Activation::Relu | Activation::Softplus) {
            // start with the output unit active; a dead ReLU critic never recovers
            critic.output_bias_mut().fill(NON_NEGATIVE_CRITIC_BIAS);
        }
        Ok(Self { variant: config.variant, beta: config.beta, encoder, head, critic })
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    /// Critic outputs on latent rows.
    pub fn critic_outputs(&self, z: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(self.critic.forward(z)?.iter().copied().collect())
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let model: Model = serde_json::from_reader(f)?;
        if model.head.input_dim() != model.encoder.output_dim() || model.critic.input_dim() != model.encoder.output_dim() {
            return Err(Error::Shape("checkpoint: head/critic input does not match latent width".into()));
        }
        Ok(model)
    }
}

impl EncodedClassifier for Model {
    fn encode(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.encoder.forward(x)
    }

    fn classify_latent(&self, z: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(self.head.forward(z)?.iter().copied().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainEvaluation {
    pub count: usize,
    pub mistakes: usize,
    pub error: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub source: DomainEvaluation,
    pub target: DomainEvaluation,
}

pub fn evaluate_domain<M: EncodedClassifier + ?Sized>(model: &M, data: &Dataset, domain: Domain) -> Result<DomainEvaluation> {
    let x = data.features(domain);
    let labels = data.labels(domain);
    let count = labels.len();
    if count == 0 {
        return Ok(DomainEvaluation { count, mistakes: 0, error: 0.0, accuracy: 1.0 });
    }
    let probs = model.predict_proba(&x)?;
    let mistakes = probs.iter().zip(&labels).filter(|(p, y)| predict_label(**p) != **y).count();
    let error = mistakes as f64 / count as f64;
    Ok(DomainEvaluation { count, mistakes, error, accuracy: 1.0 - error })
}

/// Empirical 0-1 error of `h(phi(x))` on each domain.
pub fn evaluate<M: EncodedClassifier + ?Sized>(model: &M, data: &Dataset) -> Result<Evaluation> {
    Ok(Evaluation {
        source: evaluate_domain(model, data, Domain::Source)?,
        target: evaluate_domain(model, data, Domain::Target)?,
    })
}

/// One encoded sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPoint {
    pub z: Vec<f64>,
    pub label: u8,
    pub domain: Domain,
}

/// Evenly spaced sample indices of a domain, at most `per_domain` of them.
pub(crate) fn spread_indices(n: usize, per_domain: usize) -> Vec<usize> {
    if per_domain >= n {
        return (0..n).collect();
    }
    (0..per_domain).map(|i| i * n / per_domain).collect()
}

/// Encodes up to `per_domain` samples of each domain.
pub fn encode_samples<M: EncodedClassifier + ?Sized>(model: &M, data: &Dataset, per_domain: usize) -> Result<Vec<LatentPoint>> {
    let mut out = Vec::new();
    for domain in [Domain::Source, Domain::Target] {
        let samples: Vec<_> = data.domain(domain).collect();
        let idx = spread_indices(samples.len(), per_domain);
        if idx.is_empty() {
            continue;
        }
        let d = data.dim();
        let x = Array2::from_shape_fn((idx.len(), d), |(i, j)| samples[idx[i]].x[j]);
        let z = model.encode(&x)?;
        for (row, &i) in idx.iter().enumerate() {
            out.push(LatentPoint { z: z.row(row).to_vec(), label: samples[i].label, domain });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::LabeledSample;

    struct Threshold(f64);

    impl EncodedClassifier for Threshold {
        fn encode(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
            Ok(x.clone())
        }
        fn classify_latent(&self, z: &Array2<f64>) -> Result<Vec<f64>> {
            Ok(z.column(0).iter().map(|v| if *v > self.0 { 1.0 } else { 0.0 }).collect())
        }
    }

    struct Constant;

    impl EncodedClassifier for Constant {
        fn encode(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
            Ok(x.clone())
        }
        fn classify_latent(&self, z: &Array2<f64>) -> Result<Vec<f64>> {
            Ok(vec![0.5; z.nrows()])
        }
    }

    fn data() -> Dataset {
        let mk = |x: f64, label: u8, domain| LabeledSample { x: vec![x], label, domain };
        Dataset::new(vec![
            mk(-1.0, 0, Domain::Source),
            mk(1.0, 1, Domain::Source),
            mk(-0.5, 0, Domain::Target),
            mk(0.5, 1, Domain::Target),
            mk(2.0, 1, Domain::Target),
        ])
        .unwrap()
    }

    #[test]
    fn perfect_classifier_has_zero_error() {
        let e = evaluate(&Threshold(0.0), &data()).unwrap();
        assert_eq!(e.source.error, 0.0);
        assert_eq!(e.target.error, 0.0);
    }

    #[test]
    fn half_predicts_one() {
        let e = evaluate(&Constant, &data()).unwrap();
        assert_eq!(e.source.mistakes, 1);
        assert_eq!(e.target.mistakes, 1);
        assert!((e.target.error - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn spread_indices_cover_range() {
        assert_eq!(spread_indices(3, 10), vec![0, 1, 2]);
        assert_eq!(spread_indices(10, 5), vec![0, 2, 4, 6, 8]);
    }
}
