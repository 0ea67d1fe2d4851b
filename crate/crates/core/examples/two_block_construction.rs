//! Target-error lower bound under exact alignment, and the zero-error
//! construction that needs only relaxed alignment.
//!
//! cargo run --release --example two_block_construction -- 0.5 0.9

use relaxalign::theory::{prop1_lower_bound, prop2_build_and_check};

fn main() -> relaxalign::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let (rho_s, rho_t) = (args.first().copied().unwrap_or(0.5), args.get(1).copied().unwrap_or(0.9));
    println!("exact alignment forces target error >= {}", prop1_lower_bound(rho_s, rho_t)?);
    let (_, r) = prop2_build_and_check(rho_s, rho_t)?;
    println!("construction: source error {} target error {}", r.source_error, r.target_error);
    println!("latent ratio sup {} (bound {}), sampled {:.4}", r.analytic_ratio, r.ratio_bound, r.sampled_ratio);
    println!("smallest beta admitting it: {:.4}", r.min_beta);
    Ok(())
}
