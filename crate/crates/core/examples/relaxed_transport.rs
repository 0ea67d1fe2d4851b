//! Relaxed Wasserstein distance: primal coupling, dual potential and the
//! classical distance at beta = 0.
//!
//! cargo run --example relaxed_transport

use relaxalign::distributions::DiscreteDistribution;
use relaxalign::transport::{relaxed_wasserstein_dual, relaxed_wasserstein_primal, wasserstein1};

fn main() -> relaxalign::Result<()> {
    let p = DiscreteDistribution::new(vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![3.0, 1.0]], Some(&[0.5, 0.3, 0.2]))?;
    let q = DiscreteDistribution::new(vec![vec![0.0, 1.0], vec![2.0, 2.0], vec![3.0, 0.0]], Some(&[0.25, 0.25, 0.5]))?;
    println!("W1 = {:.6}", wasserstein1(&p, &q)?);
    for beta in [0.0, 0.5, 1.0, 3.0] {
        let (primal, coupling) = relaxed_wasserstein_primal(&p, &q, beta)?;
        let (dual, potential) = relaxed_wasserstein_dual(&p, &q, beta)?;
        println!("beta {beta}: primal {primal:.6} dual {dual:.6}");
        for row in &coupling.mass {
            let cells: Vec<String> = row.iter().map(|m| format!("{m:.3}")).collect();
            println!("  {}", cells.join(" "));
        }
        let g: Vec<String> = potential.g.iter().map(|v| format!("{v:.3}")).collect();
        println!("  potential {}", g.join(" "));
    }
    Ok(())
}
