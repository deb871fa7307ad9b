//! Frozen-policy evaluation of a strategy on a shared environment stream.
//! All strategies evaluated with the same stream key see identical treaties,
//! losses, and utility noise.

use serde::{Deserialize, Serialize};

use crate::agents::policy::ActMode;
use crate::agents::qlearn::grid_bid_action;
use crate::agents::{actuarial_bid, random_bid, ActuarialCache, MappoAgent, QBaselineState};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::market::bid::ACTION_DIM;
use crate::market::{Bid, MarketEnv};
use crate::risk;
use crate::rng;

/// A bidding strategy under evaluation, one policy per agent seat.
pub enum StrategySpec<'a> {
    Marl(&'a [MappoAgent]),
    Actuarial { loading: f64 },
    Random,
    QBaseline(&'a [QBaselineState]),
}

impl StrategySpec<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            StrategySpec::Marl(_) => "marl",
            StrategySpec::Actuarial { .. } => "actuarial",
            StrategySpec::Random => "random",
            StrategySpec::QBaseline(_) => "q_baseline",
        }
    }
}

/// Raw evaluation series, one entry per episode unless noted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EvalSeries {
    /// Mean profit across agents, per episode.
    pub group_profit: Vec<f64>,
    /// Mean reward across agents, per episode.
    pub group_reward: Vec<f64>,
    /// Per (episode, agent) rewards, pooled.
    pub rewards_pooled: Vec<f64>,
    /// Every submitted premium rate.
    pub bid_rates: Vec<f64>,
    pub wins: u64,
    pub bids: u64,
    pub premium_by_line: Vec<f64>,
    pub claims_total: f64,
    pub premium_total: f64,
    /// Treaty exposures, for verifying matched streams across arms.
    pub treaty_exposures: Vec<f64>,
    /// Realized attritional losses, also stream-verification data.
    pub attritional_losses: Vec<f64>,
}

/// The tournament metric row: the six headline columns plus mean reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mean_profit: f64,
    pub cvar95: f64,
    pub sharpe: f64,
    pub sharpe_degenerate: bool,
    pub loss_ratio: f64,
    pub diversification: f64,
    pub bid_success_rate: f64,
    pub mean_reward: f64,
}

impl EvalSummary {
    pub fn from_series(series: &EvalSeries, alpha: f64) -> Result<EvalSummary> {
        let losses: Vec<f64> = series.group_profit.iter().map(|p| -p).collect();
        let cvar95 = risk::cvar(&losses, alpha)?;
        let (sharpe, sharpe_degenerate) = match risk::sharpe(&series.group_profit) {
            Ok(s) => (s, false),
            Err(Error::Degenerate(_)) => (0.0, true),
            Err(e) => return Err(e),
        };
        let loss_ratio = if series.premium_total > 0.0 {
            risk::loss_ratio(series.claims_total, series.premium_total)?
        } else {
            0.0
        };
        let diversification = if series.premium_total > 0.0 {
            risk::diversification(&series.premium_by_line)?
        } else {
            0.0
        };
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len().max(1) as f64;
        Ok(EvalSummary {
            mean_profit: mean(&series.group_profit),
            cvar95,
            sharpe,
            sharpe_degenerate,
            loss_ratio,
            diversification,
            bid_success_rate: if series.bids > 0 {
                series.wins as f64 / series.bids as f64
            } else {
                0.0
            },
            mean_reward: mean(&series.rewards_pooled),
        })
    }
}

/// Evaluate one strategy for `episodes` episodes on the environment stream
/// keyed by `env_key`.
pub fn evaluate_strategy(
    config: &RunConfig,
    env_key: u64,
    episodes: u64,
    strategy: &StrategySpec<'_>,
    cache: &mut ActuarialCache,
) -> Result<(EvalSummary, EvalSeries)> {
    let n = config.run.n_agents;
    match strategy {
        StrategySpec::Marl(agents) if agents.len() != n => {
            return Err(Error::Contract(format!(
                "marl roster has {} agents, config wants {n}",
                agents.len()
            )));
        }
        StrategySpec::QBaseline(learners) if learners.len() != n => {
            return Err(Error::Contract(format!(
                "q-baseline roster has {} learners, config wants {n}",
                learners.len()
            )));
        }
        _ => {}
    }
    let mut env = MarketEnv::new(config, env_key, episodes)?;
    let mut series = EvalSeries {
        premium_by_line: vec![0.0; config.environment.n_lines],
        ..EvalSeries::default()
    };
    for episode in 0..episodes {
        let treaty = env.current_treaty().clone();
        series.treaty_exposures.push(treaty.exposure);
        let gate = env.participation();
        let mut bids: Vec<Option<Bid>> = vec![None; n];
        for agent in 0..n {
            if !gate[agent] {
                continue;
            }
            let bid = match strategy {
                StrategySpec::Marl(agents) => {
                    let obs = env.observe(agent)?;
                    let mut act_rng =
                        rng::stream(env_key, "eval-policy", &[agent as u64, episode]);
                    let sample =
                        agents[agent].policy.act(&obs, &mut act_rng, ActMode::Deterministic)?;
                    let action: [f64; ACTION_DIM] =
                        sample.bid_action.try_into().map_err(|_| {
                            Error::Dimension("policy action is not 5-dimensional".into())
                        })?;
                    Bid::from_action(agent, treaty.treaty_kind, &action, env.bid_box())
                }
                StrategySpec::Actuarial { loading } => {
                    actuarial_bid(agent, &treaty, *loading, env.bid_box(), cache)
                }
                StrategySpec::Random => {
                    let mut act_rng =
                        rng::stream(env_key, "eval-policy", &[agent as u64, episode]);
                    random_bid(agent, treaty.treaty_kind, env.bid_box(), &mut act_rng)
                }
                StrategySpec::QBaseline(learners) => {
                    let obs = env.observe(agent)?;
                    let idx = learners[agent].greedy_action(&obs.features)?;
                    let action = grid_bid_action(
                        &learners[agent].grid,
                        idx,
                        treaty.treaty_kind,
                        env.bid_box(),
                    );
                    Bid::from_action(agent, treaty.treaty_kind, &action, env.bid_box())
                }
            };
            bids[agent] = Some(bid);
        }
        let out = env.step(&bids)?;
        series.attritional_losses.push(out.losses.attritional_total);
        let mut profit_sum = 0.0;
        let mut reward_sum = 0.0;
        for r in &out.records {
            profit_sum += r.profit;
            reward_sum += r.reward;
            series.rewards_pooled.push(r.reward);
            if r.participated {
                series.bids += 1;
                series.bid_rates.push(r.premium_rate);
            }
            if r.win {
                series.wins += 1;
            }
        }
        series.group_profit.push(profit_sum / n as f64);
        series.group_reward.push(reward_sum / n as f64);
        if let (Some(winner), Some(terms)) =
            (out.placement.winner, out.placement.bound_terms.as_ref())
        {
            let premium = terms.premium_amount(&treaty);
            series.premium_total += premium;
            series.premium_by_line[treaty.line] += premium;
            series.claims_total += out.records[winner].claims;
        }
    }
    let summary = EvalSummary::from_series(&series, config.reward.alpha)?;
    Ok((summary, series))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_config() -> RunConfig {
        let mut cfg = RunConfig::desk_scale();
        cfg.run.n_agents = 3;
        cfg
    }

    #[test]
    fn random_strategy_is_reproducible() {
        let cfg = eval_config();
        let mut cache = ActuarialCache::new(2_000);
        let (s1, r1) =
            evaluate_strategy(&cfg, 77, 40, &StrategySpec::Random, &mut cache).unwrap();
        let (s2, r2) =
            evaluate_strategy(&cfg, 77, 40, &StrategySpec::Random, &mut cache).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(r1, r2);
    }

    #[test]
    fn strategies_share_the_treaty_stream() {
        let cfg = eval_config();
        let mut cache = ActuarialCache::new(2_000);
        let (_, random_series) =
            evaluate_strategy(&cfg, 5, 30, &StrategySpec::Random, &mut cache).unwrap();
        let (_, actuarial_series) =
            evaluate_strategy(&cfg, 5, 30, &StrategySpec::Actuarial { loading: 0.1 }, &mut cache)
                .unwrap();
        assert_eq!(random_series.treaty_exposures, actuarial_series.treaty_exposures);
        assert_eq!(random_series.attritional_losses, actuarial_series.attritional_losses);
    }

    #[test]
    fn summary_metrics_are_well_formed() {
        let cfg = eval_config();
        let mut cache = ActuarialCache::new(2_000);
        let (summary, series) =
            evaluate_strategy(&cfg, 12, 60, &StrategySpec::Actuarial { loading: 0.1 }, &mut cache)
                .unwrap();
        assert!(summary.bid_success_rate > 0.0 && summary.bid_success_rate <= 1.0);
        assert!(summary.diversification >= 0.0 && summary.diversification < 1.0);
        assert!(summary.loss_ratio >= 0.0);
        assert_eq!(series.group_profit.len(), 60);
        // Every placed episode has exactly one winner.
        assert!(series.wins <= 60);
    }
}
