//! Persistence: snapshot a training run mid-rollout into the versioned
//! binary container, restore it, and show the continuation is bit-exact.
//!
//! ```bash
//! cargo run --example checkpoint_resume
//! ```

use treaty_market::config::RunConfig;
use treaty_market::experiments::{metrics, Trainer};
use treaty_market::learn::Checkpoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::desk_scale();
    cfg.run.seed = 42;
    cfg.run.episodes = 200;

    // Continuous run.
    let mut continuous = Trainer::new(&cfg)?;
    let mut rows_continuous = Vec::new();
    for _ in 0..200 {
        rows_continuous.extend(continuous.step_episode()?.metrics);
    }

    // Split run: 90 episodes, snapshot, restore, 110 more.
    let mut first = Trainer::new(&cfg)?;
    let mut rows_split = Vec::new();
    for _ in 0..90 {
        rows_split.extend(first.step_episode()?.metrics);
    }
    let bytes = first.snapshot()?.to_bytes();
    println!("checkpoint container: {} bytes", bytes.len());
    let ckpt = Checkpoint::from_bytes(&bytes)?;
    println!("sections: {:?}", ckpt.section_names().collect::<Vec<_>>());
    drop(first);

    let mut resumed = Trainer::restore(&ckpt)?;
    for _ in 90..200 {
        rows_split.extend(resumed.step_episode()?.metrics);
    }

    let identical = rows_continuous
        .iter()
        .zip(rows_split.iter())
        .all(|(a, b)| metrics::format_row(a) == metrics::format_row(b));
    println!(
        "\ncontinuous vs checkpoint-resumed metrics: {} rows, bit-exact = {identical}",
        rows_continuous.len()
    );
    assert!(identical);
    Ok(())
}
