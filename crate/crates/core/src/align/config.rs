use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Activation, AdamConfig};
use crate::error::{Error, Result};

/// The adaptation methods compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Source-only training.
    #[serde(rename = "Source")]
    Source,
    /// Jensen-Shannon domain classifier.
    #[serde(rename = "DANN")]
    Dann,
    /// Classical Wasserstein critic.
    #[serde(rename = "WDANN")]
    Wdann,
    /// Partially linearized Jensen-Shannon divergence.
    #[serde(rename = "fDANN")]
    Fdann,
    /// Jensen-Shannon with sorting-based source reweighting.
    #[serde(rename = "sDANN")]
    Sdann,
    /// Relaxed Wasserstein, soft-plus critic output.
    #[serde(rename = "WDANN1")]
    Wdann1,
    /// Relaxed Wasserstein, ReLU critic output.
    #[serde(rename = "WDANN2")]
    Wdann2,
    /// Wasserstein with sorting-based source reweighting.
    #[serde(rename = "sWDANN")]
    Swdann,
}

pub const ALL_VARIANTS: [Variant; 8] = [
    Variant::Source,
    Variant::Dann,
    Variant::Wdann,
    Variant::Fdann,
    Variant::Sdann,
    Variant::Wdann1,
    Variant::Wdann2,
    Variant::Swdann,
];

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Source => "Source",
            Variant::Dann => "DANN",
            Variant::Wdann => "WDANN",
            Variant::Fdann => "fDANN",
            Variant::Sdann => "sDANN",
            Variant::Wdann1 => "WDANN1",
            Variant::Wdann2 => "WDANN2",
            Variant::Swdann => "sWDANN",
        }
    }

    pub fn is_adversarial(self) -> bool {
        self != Variant::Source
    }

    pub fn uses_beta(self) -> bool {
        !matches!(self, Variant::Source | Variant::Dann | Variant::Wdann)
    }

    pub fn is_wasserstein(self) -> bool {
        matches!(self, Variant::Wdann | Variant::Wdann1 | Variant::Wdann2 | Variant::Swdann)
    }

    pub fn is_sorted(self) -> bool {
        matches!(self, Variant::Sdann | Variant::Swdann)
    }

    /// Output activation of the critic.
    pub fn critic_output(self) -> Activation {
        match self {
            Variant::Source | Variant::Dann | Variant::Sdann | Variant::Fdann => Activation::Sigmoid,
            Variant::Wdann | Variant::Swdann => Activation::Identity,
            Variant::Wdann1 => Activation::Softplus,
            Variant::Wdann2 => Activation::Relu,
        }
    }

    /// `"sDANN-2"` style label of a `(variant, beta)` cell.
    pub fn cell_label(self, beta: f64) -> String {
        if self.uses_beta() {
            format!("{}-{}", self.name(), beta)
        } else {
            self.name().to_string()
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ALL_VARIANTS
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown variant `{s}`")))
    }
}

/// Where the gradient penalty is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyPoints {
    /// random convex combinations of paired source and target encodings
    Interpolates,
    /// the source and target encodings themselves
    Data,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: Variant,
    pub beta: f64,
    pub lambda: f64,
    pub l2_coeff: f64,
    pub batch_size: usize,
    /// critic updates per encoder update; more lets a non-negative critic
    /// collapse to zero before the encoder moves
    pub critic_steps: usize,
    pub steps: usize,
    pub seed: u64,
    pub gp_coeff: f64,
    pub penalty_points: PenaltyPoints,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    /// encoder and head hidden units
    pub hidden_activation: Activation,
    /// critic hidden units; a saturating critic stalls the relaxed f-divergence
    pub critic_activation: Activation,
    /// hidden widths of the classifier before the latent layer
    pub encoder_hidden: Vec<usize>,
    pub latent_dim: usize,
    pub critic_hidden: Vec<usize>,
    /// scalar metrics are recorded every `log_interval` steps
    pub log_interval: usize,
    /// latent snapshots every `latent_interval` steps; 0 keeps only the final one
    pub latent_interval: usize,
    /// evaluation points per domain in latent snapshots
    pub latent_points: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Source,
            beta: 0.0,
            lambda: 1.0,
            l2_coeff: 1e-3,
            batch_size: 128,
            critic_steps: 1,
            steps: 10_000,
            seed: 0,
            gp_coeff: 10.0,
            penalty_points: PenaltyPoints::Interpolates,
            learning_rate: 1e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            hidden_activation: Activation::Tanh,
            critic_activation: Activation::Relu,
            encoder_hidden: vec![50, 50],
            latent_dim: 2,
            critic_hidden: vec![50, 50],
            log_interval: 100,
            latent_interval: 0,
            latent_points: 200,
        }
    }
}

impl TrainConfig {
    pub fn new(variant: Variant, beta: f64) -> Self {
        Self { variant, beta, ..Self::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.adam_beta1, beta2: self.adam_beta2, epsilon: 1e-8 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidBeta(self.beta));
        }
        if !self.variant.uses_beta() && self.beta != 0.0 {
            return bad(format!("{} takes no beta (got {})", self.variant, self.beta));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda must be a finite non-negative number (got {})", self.lambda));
        }
        if !(self.l2_coeff >= 0.0) || !(self.gp_coeff >= 0.0) {
            return bad("l2_coeff and gp_coeff must be non-negative".into());
        }
        if self.batch_size == 0 || self.critic_steps == 0 || self.log_interval == 0 {
            return bad("batch_size, critic_steps and log_interval must be positive".into());
        }
        if self.latent_dim == 0 || self.encoder_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return bad("layer widths must be positive".into());
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("invalid optimizer settings".into());
        }
        Ok(())
    }
}
