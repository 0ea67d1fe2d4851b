//! Relaxed f-divergences and the reweighted distance on a two-atom pair as
//! beta grows past the density ratio.
//!
//! cargo run --example relaxed_divergences

use relaxalign::distributions::{density_ratio_sup, DiscreteDistribution};
use relaxalign::divergences::{
    dual_divergence_discrete, primal_divergence, relax, reweighted_distance_discrete, GeneratorFunction, TotalVariation,
};

fn main() -> relaxalign::Result<()> {
    let atoms = vec![vec![0.0], vec![1.0]];
    // target p puts twice the source mass on the first atom
    let p = DiscreteDistribution::new(atoms.clone(), Some(&[0.8, 0.2]))?;
    let q = DiscreteDistribution::new(atoms, Some(&[0.4, 0.6]))?;
    println!("sup p/q = {}", density_ratio_sup(&p, &q));
    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "beta", "gan", "gan dual", "kl", "tv reweight");
    for beta in [0.0, 0.25, 0.5, 0.75, 1.0, 2.0] {
        let gan = relax(GeneratorFunction::Gan, beta)?;
        let kl = relax(GeneratorFunction::Kl, beta)?;
        let tv = reweighted_distance_discrete(&TotalVariation, &p, &q, beta)?;
        println!(
            "{beta:>5} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
            primal_divergence(&gan, &p, &q)?,
            dual_divergence_discrete(&gan, &p, &q)?,
            primal_divergence(&kl, &p, &q)?,
            tv.value
        );
    }
    Ok(())
}
