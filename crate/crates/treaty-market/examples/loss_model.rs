//! The two-part loss model: compound-Poisson lognormal attritional claims
//! plus Bernoulli/Pareto catastrophes, checked against closed-form means.
//!
//! ```bash
//! cargo run --example loss_model
//! ```

use treaty_market::config::EnvConfig;
use treaty_market::market::{generate_treaty, sample_losses};
use treaty_market::rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = EnvConfig::default();
    let mut treaty_rng = rng::stream(9, "loss-example-treaty", &[]);
    let treaty = generate_treaty(&mut treaty_rng, &cfg, 0)?;
    println!(
        "treaty: exposure {:.3}, attritional Poisson({}) x LogNormal(mean {:.4}, sigma {}), cat Bernoulli({}) x Pareto(alpha {}, scale {:.4})",
        treaty.exposure,
        treaty.attritional_freq,
        treaty.attritional_severity_mean,
        treaty.attritional_severity_sigma,
        treaty.cat_prob,
        treaty.cat_tail_index,
        treaty.cat_scale
    );

    let n = 400_000u64;
    let mut loss_rng = rng::stream(9, "loss-example-draws", &[]);
    let mut attritional_sum = 0.0;
    let mut cat_sum = 0.0;
    let mut cat_events = 0u64;
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let l = sample_losses(&treaty, &mut loss_rng);
        attritional_sum += l.attritional_total;
        cat_sum += l.cat_total;
        if l.cat_total > 0.0 {
            cat_events += 1;
        }
        worst = worst.max(l.total());
    }

    let attritional_expected = treaty.attritional_freq * treaty.attritional_severity_mean;
    let cat_expected = treaty.cat_prob * treaty.cat_tail_index * treaty.cat_scale
        / (treaty.cat_tail_index - 1.0);
    println!("\nover {n} simulated periods:");
    println!(
        "  attritional mean {:.6} vs compound-Poisson identity freq x E[severity] = {:.6}",
        attritional_sum / n as f64,
        attritional_expected
    );
    println!(
        "  catastrophe mean {:.6} vs p x alpha x scale/(alpha-1) = {:.6} (occurrence rate {:.4})",
        cat_sum / n as f64,
        cat_expected,
        cat_events as f64 / n as f64
    );
    println!("  worst simulated period lost {:.3} ({:.1}% of exposure)", worst, 100.0 * worst / treaty.exposure);
    Ok(())
}
