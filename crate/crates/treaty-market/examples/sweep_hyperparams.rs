//! Hyperparameter stability study: six one-factor variations of the base
//! config (actor learning rate, discount, minibatch size), three seeds per
//! cell, compared with a one-way ANOVA.
//!
//! ```bash
//! cargo run --example sweep_hyperparams
//! ```

use treaty_market::cli::default_hparam_grid;
use treaty_market::config::RunConfig;
use treaty_market::experiments::sweep_hyperparams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::desk_scale();
    cfg.run.seed = 21;
    let grid = default_hparam_grid(&cfg);
    println!("grid cells: {:?}", grid.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>());

    let report = sweep_hyperparams(&grid, 3, cfg.run.seed)?;
    println!("\n{:<18} {:>14} {:>10}", "cell", "final reward", "std");
    for cell in &report.cells {
        println!("{:<18} {:>14.5} {:>10.5}", cell.name, cell.mean, cell.std);
    }
    match &report.anova {
        Some(a) => println!(
            "\none-way ANOVA across cells: F({}, {}) = {:.4}, p = {:.3e}",
            a.df_between, a.df_within, a.f_statistic, a.p_value
        ),
        None => println!("\nANOVA undefined for this grid (degenerate)"),
    }
    Ok(())
}
