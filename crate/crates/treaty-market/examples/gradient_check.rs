//! Verify the hand-derived backpropagation against central finite
//! differences on random networks.
//!
//! ```bash
//! cargo run --example gradient_check
//! ```

use rand::Rng;
use treaty_market::learn::{finite_diff_check, DenseNet, GradCheck};
use treaty_market::rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = rng::stream(17, "gradient-example", &[]);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut skipped = 0;
    let started = std::time::Instant::now();
    while checked < 50 {
        let sizes = [
            rng.random_range(3..8usize),
            rng.random_range(8..16),
            rng.random_range(4..12),
            rng.random_range(1..4),
        ];
        let net = DenseNet::init(&sizes, &mut rng)?;
        let input: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.5..1.5)).collect();
        match finite_diff_check(&net, &input, 1e-5)? {
            GradCheck::SkippedAtKink => skipped += 1,
            GradCheck::MaxRelativeError(e) => {
                worst = worst.max(e);
                checked += 1;
                if checked % 10 == 0 {
                    println!("checked {checked:>3} nets, worst relative error so far {worst:.3e}");
                }
            }
        }
    }
    println!(
        "\n{checked} networks verified in {:.2?} ({skipped} skipped at ReLU kinks)",
        started.elapsed()
    );
    println!("worst |analytic - central difference| relative error: {worst:.3e}");
    Ok(())
}
