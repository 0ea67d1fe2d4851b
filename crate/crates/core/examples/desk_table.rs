//! A small slice of the synthetic variant table: three cells, two seeds.
//!
//! cargo run --release --example desk_table -- [steps]

use relaxalign::cli::{parse_cell, run_table1, worker_count, ExperimentConfig};

fn main() -> relaxalign::Result<()> {
    let mut config = ExperimentConfig {
        cells: ["Source", "DANN", "sDANN-2"].iter().map(|c| parse_cell(c)).collect::<relaxalign::Result<_>>()?,
        seeds: vec![0, 1],
        output_dir: std::env::temp_dir().join("relaxalign_desk_table"),
        ..ExperimentConfig::default()
    };
    config.train.steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let table = run_table1(&config, worker_count()?)?;
    table.print(&mut std::io::stdout())?;
    println!("artifacts in {}", config.output_dir.display());
    Ok(())
}
