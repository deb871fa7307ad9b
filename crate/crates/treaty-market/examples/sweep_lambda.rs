//! Risk-aversion sweep: train per λ, evaluate each policy in an
//! actuarial-anchored market, and extract the profit/CVaR Pareto frontier.
//!
//! ```bash
//! cargo run --example sweep_lambda
//! ```

use treaty_market::config::RunConfig;
use treaty_market::experiments::sweep_lambda;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::desk_scale();
    cfg.run.seed = 11;

    let lambdas = [0.01, 0.1, 1.0, 10.0];
    println!("sweeping lambda over {lambdas:?} (3 seeds each)...");
    let report = sweep_lambda(&cfg, &lambdas, 3, 300)?;

    println!("\n{:<8} {:>12} {:>12} {:>12} {:>12}", "lambda", "mean profit", "med profit", "mean cvar95", "med cvar95");
    for cell in &report.cells {
        println!(
            "{:<8} {:>12.5} {:>12.5} {:>12.5} {:>12.5}",
            cell.lambda, cell.mean_profit, cell.median_profit, cell.mean_cvar95, cell.median_cvar95
        );
    }
    println!("\nPareto frontier (cvar ascending):");
    for (profit, cvar) in &report.frontier {
        println!("  profit {profit:>9.5} at cvar95 {cvar:>9.5}");
    }
    if let Some(w) = &report.welch_extremes {
        println!(
            "\nextreme-group comparison ({}): mean difference {:.5}, t = {:.3}, p = {:.4}",
            report.welch_extremes_label, w.mean_difference, w.statistic, w.p_value
        );
    }
    Ok(())
}
