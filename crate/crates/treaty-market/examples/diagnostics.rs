//! Learning-curve diagnostics: rolling reward-variance with a convergence
//! verdict, plus the post-shock recovery slope from a run with a windowed
//! catastrophe shock.
//!
//! ```bash
//! cargo run --example diagnostics
//! ```

use treaty_market::config::{RunConfig, StressKind};
use treaty_market::experiments::{
    group_rewards_per_episode, recovery_slope, train, variance_diagnostics,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Plain run first.
    let mut cfg = RunConfig::desk_scale();
    cfg.run.seed = 31;
    println!("training a baseline run...");
    let out = train(&cfg)?;
    let rewards = group_rewards_per_episode(&out.metrics);
    let diag = variance_diagnostics(&rewards, 100, 1.0)?;
    println!(
        "variance series over {} windows: initial std {:.5}, final std {:.5}",
        diag.variances.len(),
        diag.initial_std,
        diag.final_std
    );
    println!(
        "trend slope {:.3e} (p = {:.3e}) -> {}",
        diag.trend.slope,
        diag.trend.p_value,
        if diag.converged { "converged" } else { "not converged" }
    );

    // Windowed catastrophe shock between episodes 600 and 700, with dense
    // evaluation snapshots to estimate the post-shock recovery slope.
    let mut shocked = cfg.clone();
    shocked.run.seed = 32;
    shocked.run.evaluation_interval = 100;
    shocked.run.eval_episodes = 40;
    shocked.stress.kind = StressKind::Catastrophe;
    shocked.stress.window_start = Some(600);
    shocked.stress.window_end = Some(700);
    println!("\ntraining with a catastrophe shock in episodes 600..700...");
    let out = train(&shocked)?;
    let recovery = recovery_slope(&out.evaluations, &shocked.stress)?;
    println!("post-shock evaluation rewards:");
    for (episode, reward) in &recovery.post_shock_evaluations {
        println!("  episode {episode:>5}: {reward:.5}");
    }
    println!(
        "recovery slope: {:+.6} reward units per episode (p = {:.3e})",
        recovery.slope_per_episode, recovery.slope_p_value
    );
    Ok(())
}
