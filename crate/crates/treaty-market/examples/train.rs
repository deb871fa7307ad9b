//! Train the MAPPO agents at desk scale and write the full run artifact set
//! (metrics CSV, episode log, evaluation snapshots, checkpoint, manifest).
//!
//! ```bash
//! cargo run --example train
//! ```

use treaty_market::config::RunConfig;
use treaty_market::experiments::run_training;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::desk_scale();
    cfg.run.seed = 1;
    cfg.output.dir = "out/train-example".to_string();

    let started = std::time::Instant::now();
    let (manifest, output) = run_training(&cfg)?;

    println!(
        "trained {} agents for {} episodes ({} policy updates) in {:.2?}",
        cfg.run.n_agents,
        manifest.summary.episodes,
        manifest.summary.updates,
        started.elapsed()
    );
    println!("\nevaluation snapshots (deterministic policies):");
    for snap in &output.evaluations {
        println!(
            "  episode {:>5}: mean reward {:>8.5}, mean profit {:>8.5}",
            snap.at_episode, snap.mean_reward, snap.mean_profit
        );
    }
    println!("\nper-agent mean reward at the final snapshot:");
    let last = output.evaluations.last().expect("evaluations");
    for (agent, reward) in last.per_agent_mean_reward.iter().enumerate() {
        println!("  agent {agent}: {reward:.5}");
    }
    println!("\nartifacts under {}:", cfg.output.dir);
    for path in &manifest.outputs {
        println!("  {}", path.display());
    }
    Ok(())
}
