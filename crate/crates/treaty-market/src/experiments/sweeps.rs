//! Parameter sweeps: the risk-aversion (λ) sweep with its risk-return
//! frontier, and the hyperparameter-grid stability study with one-way ANOVA.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::policy::ActMode;
use crate::agents::{actuarial_bid, ActuarialCache, MappoAgent};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::trainer::train;
use crate::market::bid::ACTION_DIM;
use crate::market::{Bid, MarketEnv};
use crate::risk::{anova_one_way, cvar, pareto_frontier, welch_t, AnovaReport, StatReport};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaCell {
    pub lambda: f64,
    /// (mean profit, CVaR95) per seed.
    pub per_seed: Vec<(f64, f64)>,
    pub mean_profit: f64,
    pub mean_cvar95: f64,
    pub median_profit: f64,
    pub median_cvar95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweepReport {
    pub cells: Vec<LambdaCell>,
    /// Non-dominated (profit, CVaR95) points over the per-λ means.
    pub frontier: Vec<(f64, f64)>,
    /// Welch t on per-seed profits of the extreme λ groups (lowest vs
    /// highest), mirroring the risk-sensitivity comparison table.
    pub welch_extremes: Option<StatReport>,
    pub welch_extremes_label: String,
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// A λ-trained policy's own risk-return profile, measured in an anchored
/// market: the focal agent bids against actuarial competitors, so a policy
/// that retreats from risk wins less instead of inflating the clearing
/// price (pure self-play would conflate risk preference with market
/// softening). Returns the focal agent's mean per-episode profit and the
/// CVaR of its per-episode losses, averaged over focal seats.
fn eval_policy_vs_actuarial(
    config: &RunConfig,
    env_key: u64,
    episodes: u64,
    agents: &[MappoAgent],
    cache: &mut ActuarialCache,
) -> Result<(f64, f64)> {
    let n = config.run.n_agents;
    let loading = config.algorithm.actuarial_loading;
    let alpha = config.reward.alpha;
    let mut profit_means = Vec::with_capacity(n);
    let mut cvars = Vec::with_capacity(n);
    for focal in 0..n {
        let mut env = MarketEnv::new(config, rng::derive_key(env_key, "focal", &[focal as u64]), episodes)?;
        let mut focal_profits = Vec::with_capacity(episodes as usize);
        for episode in 0..episodes {
            let treaty = env.current_treaty().clone();
            let gate = env.participation();
            let mut bids: Vec<Option<Bid>> = vec![None; n];
            for agent in 0..n {
                if !gate[agent] {
                    continue;
                }
                bids[agent] = Some(if agent == focal {
                    let obs = env.observe(agent)?;
                    let mut act_rng =
                        rng::stream(env_key, "eval-policy", &[agent as u64, episode]);
                    let sample =
                        agents[focal].policy.act(&obs, &mut act_rng, ActMode::Deterministic)?;
                    let action: [f64; ACTION_DIM] =
                        sample.bid_action.try_into().map_err(|_| {
                            Error::Dimension("policy action is not 5-dimensional".into())
                        })?;
                    Bid::from_action(agent, treaty.treaty_kind, &action, env.bid_box())
                } else {
                    actuarial_bid(agent, &treaty, loading, env.bid_box(), cache)
                });
            }
            let out = env.step(&bids)?;
            focal_profits.push(out.records[focal].profit);
        }
        profit_means.push(focal_profits.iter().sum::<f64>() / focal_profits.len() as f64);
        let losses: Vec<f64> = focal_profits.iter().map(|p| -p).collect();
        cvars.push(cvar(&losses, alpha)?);
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    Ok((mean(&profit_means), mean(&cvars)))
}

/// Train one policy set per (λ, seed) and evaluate each frozen policy in an
/// actuarial-anchored market; report the risk-return cells, the Pareto
/// frontier, and the extreme-λ Welch test.
pub fn sweep_lambda(
    config: &RunConfig,
    lambdas: &[f64],
    seeds_per_lambda: usize,
    eval_episodes: u64,
) -> Result<LambdaSweepReport> {
    if lambdas.is_empty() {
        return Err(Error::Contract("lambda sweep needs at least one value".into()));
    }
    if seeds_per_lambda == 0 {
        return Err(Error::Contract("lambda sweep needs at least one seed".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..lambdas.len())
        .flat_map(|li| (0..seeds_per_lambda).map(move |si| (li, si)))
        .collect();
    let results: Vec<Result<(usize, usize, f64, f64)>> = jobs
        .par_iter()
        .map(|&(li, si)| {
            let mut cfg = config.clone();
            cfg.reward.lambda_cvar = lambdas[li];
            cfg.run.seed =
                rng::derive_key(config.run.seed, "lambda-sweep", &[li as u64, si as u64]);
            let out = train(&cfg)?;
            let key = rng::derive_key(cfg.run.seed, "lambda-eval", &[]);
            let mut cache = ActuarialCache::new(10_000);
            let (profit, cvar95) =
                eval_policy_vs_actuarial(&cfg, key, eval_episodes, &out.agents, &mut cache)?;
            Ok((li, si, profit, cvar95))
        })
        .collect();

    let mut per_cell: Vec<Vec<(f64, f64)>> = vec![vec![(0.0, 0.0); seeds_per_lambda]; lambdas.len()];
    for r in results {
        let (li, si, profit, cvar) = r?;
        per_cell[li][si] = (profit, cvar);
    }

    let cells: Vec<LambdaCell> = lambdas
        .iter()
        .zip(per_cell)
        .map(|(&lambda, per_seed)| {
            let profits: Vec<f64> = per_seed.iter().map(|(p, _)| *p).collect();
            let cvars: Vec<f64> = per_seed.iter().map(|(_, c)| *c).collect();
            LambdaCell {
                lambda,
                mean_profit: profits.iter().sum::<f64>() / profits.len() as f64,
                mean_cvar95: cvars.iter().sum::<f64>() / cvars.len() as f64,
                median_profit: median(&profits),
                median_cvar95: median(&cvars),
                per_seed,
            }
        })
        .collect();

    let frontier = pareto_frontier(
        &cells.iter().map(|c| (c.mean_profit, c.mean_cvar95)).collect::<Vec<_>>(),
    );

    let (welch_extremes, label) = if cells.len() >= 2 && seeds_per_lambda >= 2 {
        let lo = cells
            .iter()
            .min_by(|a, b| a.lambda.total_cmp(&b.lambda))
            .expect("non-empty");
        let hi = cells
            .iter()
            .max_by(|a, b| a.lambda.total_cmp(&b.lambda))
            .expect("non-empty");
        let p_lo: Vec<f64> = lo.per_seed.iter().map(|(p, _)| *p).collect();
        let p_hi: Vec<f64> = hi.per_seed.iter().map(|(p, _)| *p).collect();
        (
            Some(welch_t(&p_lo, &p_hi)?),
            format!("lambda={} vs lambda={}", lo.lambda, hi.lambda),
        )
    } else {
        (None, "single-cell sweep: no comparison".to_string())
    };

    Ok(LambdaSweepReport { cells, frontier, welch_extremes, welch_extremes_label: label })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HparamCellResult {
    pub name: String,
    /// Final-evaluation mean rewards, one per seed.
    pub final_rewards: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HparamReport {
    pub cells: Vec<HparamCellResult>,
    /// One-way ANOVA across cells; absent (flagged) for degenerate grids.
    pub anova: Option<AnovaReport>,
    pub anova_degenerate: bool,
}

/// Run every named configuration over `seeds` seeds and compare
/// final-evaluation rewards across cells with a one-way ANOVA.
pub fn sweep_hyperparams(
    grid: &[(String, RunConfig)],
    seeds: usize,
    base_seed: u64,
) -> Result<HparamReport> {
    if grid.is_empty() {
        return Err(Error::Contract("hyperparameter grid is empty".into()));
    }
    if seeds == 0 {
        return Err(Error::Contract("hyperparameter sweep needs at least one seed".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|ci| (0..seeds).map(move |si| (ci, si)))
        .collect();
    let results: Vec<Result<(usize, usize, f64)>> = jobs
        .par_iter()
        .map(|&(ci, si)| {
            let mut cfg = grid[ci].1.clone();
            cfg.run.seed = rng::derive_key(base_seed, "hparam-sweep", &[ci as u64, si as u64]);
            let out = train(&cfg)?;
            let final_reward = out
                .evaluations
                .last()
                .map(|s| s.mean_reward)
                .ok_or_else(|| Error::Contract("run produced no evaluations".into()))?;
            Ok((ci, si, final_reward))
        })
        .collect();

    let mut rewards: Vec<Vec<f64>> = vec![vec![0.0; seeds]; grid.len()];
    for r in results {
        let (ci, si, reward) = r?;
        rewards[ci][si] = reward;
    }

    let cells: Vec<HparamCellResult> = grid
        .iter()
        .zip(rewards.iter())
        .map(|((name, _), rs)| {
            let mean = rs.iter().sum::<f64>() / rs.len() as f64;
            let std =
                (rs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / rs.len() as f64).sqrt();
            HparamCellResult { name: name.clone(), final_rewards: rs.clone(), mean, std }
        })
        .collect();

    let (anova, degenerate) = match anova_one_way(&rewards) {
        Ok(a) => (Some(a), false),
        Err(Error::Degenerate(_)) => (None, true),
        Err(e) => return Err(e),
    };
    Ok(HparamReport { cells, anova, anova_degenerate: degenerate })
}
