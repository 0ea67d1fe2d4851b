//! Domain-adversarial training: source classification loss plus a weighted
//! distance between source and target encodings, estimated by a critic and
//! optimized by alternating updates.

mod config;
mod metrics;
mod model;
mod objective;
mod train;

pub use config::{PenaltyPoints, TrainConfig, Variant, ALL_VARIANTS};
pub use metrics::{write_latent_csv, LatentSnapshot, RunMetrics, RunSummary, StepMetrics, LATENT_CSV_VERSION, METRICS_CSV_VERSION};
pub use model::{encode_samples, evaluate, evaluate_domain, predict_label, DomainEvaluation, EncodedClassifier, Evaluation, LatentPoint, Model};
pub use objective::{variant_distance_term, DistanceTerms};
pub use train::{train, Trainer};
