//! Trains sDANN briefly, then estimates the target-error bound constants and
//! the three-term risk decomposition.
//!
//! cargo run --release --example bound_audit -- [steps]

use relaxalign::align::{train, TrainConfig, Variant};
use relaxalign::distributions::{sample_synthetic, GaussianMixtureSpec};
use relaxalign::theory::{audit_bound, risk_decomposition, AuditParams, LabelEstimate};

fn main() -> relaxalign::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let data = sample_synthetic(&GaussianMixtureSpec::label_shift(), 0)?;
    let (model, _) = train(TrainConfig::new(Variant::Sdann, 2.0).with_steps(steps), &data)?;
    let audit = audit_bound(&model, &data, &AuditParams::default())?;
    println!("L {:.3}  margin {:.3}  beta {}", audit.lipschitz, audit.margin, audit.beta);
    println!("delta1 {:.3}  delta2 {:.3}  delta3 {:.3}", audit.delta1, audit.delta2, audit.delta3);
    println!(
        "source error {:.3}  bound {:?}  measured target error {:.3}  slack {:.3}  {:?}",
        audit.source_error, audit.bound_value, audit.measured_target_error, audit.estimation_slack, audit.status
    );
    let d = risk_decomposition(&model, &data, LabelEstimate::Knn(7))?;
    println!(
        "decomposition: source {:.3} + labeling {:.3} + alignment {:.3} = {:.3}",
        d.source_term, d.labeling_term, d.alignment_term, d.total
    );
    Ok(())
}
