//! Trains one variant on the shifted synthetic task and reports accuracies.
//!
//! cargo run --release --example train_variant -- sDANN 2 [steps] [seed]

use std::time::Instant;

use relaxalign::align::{train, TrainConfig, Variant};
use relaxalign::distributions::{sample_synthetic, GaussianMixtureSpec};

fn main() -> relaxalign::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let variant: Variant = args.first().map_or("sDANN", String::as_str).parse()?;
    let beta: f64 = args.get(1).map_or(Ok(2.0), |s| s.parse()).map_err(|e| relaxalign::Error::Parse(format!("{e}")))?;
    let steps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);
    let beta = if variant.uses_beta() { beta } else { 0.0 };

    let data = sample_synthetic(&GaussianMixtureSpec::label_shift(), seed)?;
    let config = TrainConfig::new(variant, beta).with_steps(steps).with_seed(seed);
    let start = Instant::now();
    let (_, metrics) = train(config, &data)?;
    let s = metrics.summary()?;
    println!(
        "{}: source {:.1}%  target {:.1}%  ({:.1}s)",
        variant.cell_label(beta),
        100.0 * s.source_accuracy,
        100.0 * s.target_accuracy,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
