//! Implicit reweighting by sorting: which batch entries survive at each beta.
//!
//! cargo run --example sort_reweighting

use relaxalign::divergences::sort_reweight;

fn main() -> relaxalign::Result<()> {
    let scores = [0.9, 0.2, 0.5, 0.7, 0.1, 0.65];
    for beta in [0.0, 0.5, 1.0, 2.0, 5.0] {
        let w = sort_reweight(&scores, beta)?;
        let kept: Vec<String> = w.kept().iter().map(|&i| format!("{}", scores[i])).collect();
        println!("beta {beta}: keep [{}]", kept.join(", "));
    }
    Ok(())
}
