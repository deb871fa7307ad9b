//! Walk through the placement mechanism on one treaty: stochastic utility
//! scoring, the incumbent tolerance rule, and a last-look revision.
//!
//! ```bash
//! cargo run --example market_mechanics
//! ```

use treaty_market::config::EnvConfig;
use treaty_market::market::bid::ACTION_DIM;
use treaty_market::market::{
    coverage_quality, generate_treaty, last_look, sample_losses, score_bid, select_winner,
    Bid, BidBox, InsurerPreferences, PlacementOutcome,
};
use treaty_market::rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = EnvConfig::default();
    let bounds = BidBox::from_env(&cfg);
    let prefs = InsurerPreferences::from_env(&cfg);

    let mut treaty_rng = rng::stream(5, "mechanics-treaty", &[]);
    let treaty = generate_treaty(&mut treaty_rng, &cfg, 0)?;
    println!(
        "treaty {:?} on line {}: exposure {:.3}, layer [{:.3}, {:.3}], retention {:.2}",
        treaty.treaty_kind,
        treaty.line,
        treaty.exposure,
        treaty.attachment,
        treaty.attachment + treaty.limit,
        treaty.retention
    );

    // Three sealed bids with different price/coverage trade-offs.
    let actions: [[f64; ACTION_DIM]; 3] = [
        [0.090, 0.7, 0.05, -0.10, 1.10], // generous coverage, mid price
        [0.070, 0.4, 0.00, 0.10, 0.90],  // cheap, stingier coverage
        [0.085, 0.5, 0.10, 0.00, 1.00],  // middle of the road
    ];
    let bids: Vec<Bid> = actions
        .iter()
        .enumerate()
        .map(|(agent, action)| Bid::from_action(agent, treaty.treaty_kind, action, &bounds))
        .collect();

    let mut score_rng = rng::stream(5, "mechanics-score", &[]);
    let utilities: Vec<(usize, f64)> = bids
        .iter()
        .map(|bid| {
            let quality = coverage_quality(&treaty, bid, &prefs, &bounds);
            let utility = score_bid(&treaty, bid, &prefs, &bounds, &mut score_rng);
            println!(
                "  agent {}: rate {:.3}, coverage quality {:.3}, utility {:+.4}",
                bid.agent_id, bid.premium_rate, quality, utility
            );
            (bid.agent_id, utility)
        })
        .collect();

    let incumbent = Some(2usize);
    let selection = select_winner(&utilities, incumbent, &prefs)?;
    println!(
        "\nselection with agent 2 incumbent (delta = {}): winner = agent {}, incumbent rule used = {}",
        prefs.delta_incumbent, selection.winner, selection.incumbent_rule_used
    );

    // If the incumbent lost, give it the last look with a sharpened rate.
    if selection.winner != 2 {
        let outcome = PlacementOutcome {
            treaty_id: treaty.id,
            winner: Some(selection.winner),
            utilities: utilities.clone(),
            last_look_used: false,
            incumbent_rule_used: selection.incumbent_rule_used,
            premium_paid: bids[selection.winner].premium_amount(&treaty),
            bound_terms: Some(bids[selection.winner].clone()),
        };
        let mut revised = bids[2].clone();
        revised.premium_rate *= 1.0 - cfg.last_look_rate_cut;
        let mut ll_rng = rng::stream(5, "mechanics-last-look", &[]);
        let after = last_look(&outcome, 2, revised, &treaty, &prefs, &bounds, &mut ll_rng)?;
        println!(
            "last look: incumbent revises its rate down {:.0}% -> winner = agent {}, last_look_used = {}",
            cfg.last_look_rate_cut * 100.0,
            after.winner.expect("placed"),
            after.last_look_used
        );
    }

    // Realize one period of losses and show the layer mechanics.
    let mut loss_rng = rng::stream(5, "mechanics-loss", &[]);
    let losses = sample_losses(&treaty, &mut loss_rng);
    println!(
        "\nrealized losses: attritional {:.4}, catastrophe {:.4}, total {:.4}",
        losses.attritional_total,
        losses.cat_total,
        losses.total()
    );
    Ok(())
}
