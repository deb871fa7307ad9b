//! Critic-architecture ablation: centralized critic (CTDE) vs per-agent
//! local critics vs non-learning random bidders, compared on final-window
//! reward variance and convergence verdicts.
//!
//! ```bash
//! cargo run --example ablation
//! ```

use treaty_market::config::RunConfig;
use treaty_market::experiments::ablation_ctde;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::desk_scale();
    cfg.run.seed = 11;

    println!("running the ablation (5 seeds per configuration)...");
    let report = ablation_ctde(&cfg, 5, 100, 1.0)?;

    println!(
        "\n{:<18} {:>16} {:>16}   per-seed final std",
        "configuration", "median final std", "verdict"
    );
    for row in &report.rows {
        println!(
            "{:<18} {:>16.5} {:>16}   {:?}",
            row.configuration,
            row.final_std,
            row.verdict,
            row.per_seed_final_std
                .iter()
                .map(|x| (x * 1e4).round() / 1e4)
                .collect::<Vec<_>>()
        );
    }
    Ok(())
}
