//! Benchmark the learned policies against the actuarial, random, and
//! single-agent Q-learning baselines on matched treaty/loss streams.
//!
//! ```bash
//! cargo run --example tournament
//! ```

use treaty_market::config::RunConfig;
use treaty_market::experiments::{run_baseline_tournament, train, StrategyKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::desk_scale();
    cfg.run.seed = 100;
    // Keep the Q baseline cheap for the example.
    cfg.algorithm.q_update_every = 4;
    cfg.algorithm.q_batch_size = 32;

    println!("training the MAPPO roster...");
    let out = train(&cfg)?;

    let roster = [
        StrategyKind::Marl,
        StrategyKind::Actuarial,
        StrategyKind::Random,
        StrategyKind::QBaseline,
    ];
    println!("running the tournament (5 matched seeds, 300 episodes each)...");
    let report = run_baseline_tournament(&cfg, &roster, Some(&out.agents), None, 5, 300)?;

    println!(
        "\n{:<12} {:>10} {:>10} {:>8} {:>11} {:>8} {:>9}",
        "strategy", "profit", "cvar95", "sharpe", "loss ratio", "divers.", "win rate"
    );
    for row in &report.rows {
        println!(
            "{:<12} {:>10.5} {:>10.5} {:>8.3} {:>11.3} {:>8.3} {:>9.3}",
            row.strategy,
            row.mean_profit,
            row.cvar95,
            row.sharpe,
            row.loss_ratio,
            row.diversification,
            row.bid_success_rate
        );
    }
    println!("\npairwise comparisons:");
    for cmp in &report.pairwise {
        println!(
            "  {:<10} vs {:<10}  Welch t = {:>7.3} (p = {:.3e})   K-S D = {:.4} (p = {:.3e})",
            cmp.a,
            cmp.b,
            cmp.welch_profit.statistic,
            cmp.welch_profit.p_value,
            cmp.ks_rewards.statistic,
            cmp.ks_rewards.p_value
        );
    }
    Ok(())
}
