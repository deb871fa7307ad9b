//! Matched-seed stress studies: evaluate trained policies under baseline and
//! stressed regimes sharing identical treaty/loss randomness, then test the
//! reward degradation with paired t-tests and a percentile bootstrap CI.
//!
//! ```bash
//! cargo run --example stress_study
//! ```

use treaty_market::config::{RunConfig, StressConfig, StressKind};
use treaty_market::experiments::{run_stress_study, train};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::desk_scale();
    cfg.run.seed = 11;

    println!("training the roster once at the baseline regime...");
    let out = train(&cfg)?;

    for kind in [StressKind::Catastrophe, StressKind::Capacity] {
        let regime = StressConfig { kind, ..StressConfig::default() };
        let report = run_stress_study(&cfg, &regime, &out.agents, 10, 200, 1_000)?;
        println!("\n=== {kind:?} (10 matched seeds x 200 episodes) ===");
        println!("arms share treaty/loss randomness: {}", report.matched_streams);
        println!(
            "{:<22} {:>12} {:>12} {:>12}",
            "metric", "baseline", "stressed", "paired p"
        );
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        let base_r: Vec<f64> = report.baseline.iter().map(|m| m.mean_reward).collect();
        let str_r: Vec<f64> = report.stressed.iter().map(|m| m.mean_reward).collect();
        println!(
            "{:<22} {:>12.5} {:>12.5} {:>12.3e}",
            "mean episode reward",
            mean(&base_r),
            mean(&str_r),
            report.paired_reward.p_value
        );
        let base_b: Vec<f64> = report.baseline.iter().map(|m| m.bid_rate_std).collect();
        let str_b: Vec<f64> = report.stressed.iter().map(|m| m.bid_rate_std).collect();
        println!(
            "{:<22} {:>12.5} {:>12.5} {:>12.3e}",
            "bid magnitude std",
            mean(&base_b),
            mean(&str_b),
            report.paired_bid_std.p_value
        );
        let base_c: Vec<f64> = report.baseline.iter().map(|m| m.cvar95).collect();
        let str_c: Vec<f64> = report.stressed.iter().map(|m| m.cvar95).collect();
        println!(
            "{:<22} {:>12.5} {:>12.5} {:>12.3e}",
            "CVaR95",
            mean(&base_c),
            mean(&str_c),
            report.paired_cvar.p_value
        );
        println!(
            "reward difference bootstrap 95% CI: [{:.5}, {:.5}]",
            report.bootstrap_reward_diff.ci_low.unwrap_or(f64::NAN),
            report.bootstrap_reward_diff.ci_high.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
