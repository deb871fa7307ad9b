//! Stress regimes: the pure config transformation and the matched-seed
//! baseline-vs-stressed evaluation study with paired tests and a bootstrap
//! CI on the reward difference.

use serde::{Deserialize, Serialize};

use crate::agents::{ActuarialCache, MappoAgent};
use crate::config::{RunConfig, StressConfig, StressKind};
use crate::error::{Error, Result};
use crate::experiments::evaluate::{evaluate_strategy, StrategySpec};
use crate::risk::{bootstrap_ci, paired_t, StatReport};
use crate::rng;

/// Apply a stress regime to a config.
///
/// Whole-run regimes are baked directly into the affected parameters
/// (catastrophe: cat probability saturating at 1 and severity scale;
/// capacity: all agent capital) and the stress section is cleared. Windowed
/// regimes are recorded in the stress section for the environment to apply
/// per episode. The input config is untouched.
pub fn apply_stress(config: &RunConfig, regime: &StressConfig) -> RunConfig {
    let mut out = config.clone();
    if regime.kind == StressKind::None {
        return out;
    }
    let windowed = regime.window_start.is_some() || regime.window_end.is_some();
    if windowed {
        out.stress = regime.clone();
        return out;
    }
    match regime.kind {
        StressKind::Catastrophe => {
            out.environment.cat_prob =
                (out.environment.cat_prob * regime.cat_multiplier).min(1.0);
            out.environment.cat_scale *= regime.cat_multiplier;
        }
        StressKind::Capacity => {
            out.environment.initial_capital *= regime.capacity_factor;
        }
        StressKind::None => unreachable!(),
    }
    out.stress = StressConfig::default();
    out
}

/// Per-arm metrics for one seed: the three §-level study metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressArmMetrics {
    pub mean_reward: f64,
    pub bid_rate_std: f64,
    pub cvar95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressStudyReport {
    pub regime: StressKind,
    pub seeds: usize,
    pub eval_episodes: u64,
    pub baseline: Vec<StressArmMetrics>,
    pub stressed: Vec<StressArmMetrics>,
    /// Paired t on stressed − baseline differences, per metric.
    pub paired_reward: StatReport,
    pub paired_bid_std: StatReport,
    pub paired_cvar: StatReport,
    /// Percentile bootstrap CI for the mean reward difference
    /// (stressed − baseline).
    pub bootstrap_reward_diff: StatReport,
    /// Both arms consumed identical treaty/loss randomness (verified from
    /// the evaluation series).
    pub matched_streams: bool,
}

fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Matched-seed stress study on a trained policy roster.
///
/// For every seed the baseline and stressed arms share the environment
/// stream key, so treaties and loss draws coincide; only the stressed
/// parameters differ.
pub fn run_stress_study(
    config: &RunConfig,
    regime: &StressConfig,
    trained: &[MappoAgent],
    seeds: usize,
    eval_episodes: u64,
    bootstrap_resamples: usize,
) -> Result<StressStudyReport> {
    if regime.kind == StressKind::None {
        return Err(Error::Contract("stress study requires a non-none regime".into()));
    }
    if seeds < 2 {
        return Err(Error::Contract(format!("stress study needs >= 2 seeds, got {seeds}")));
    }
    let stressed_cfg = apply_stress(config, regime);
    let mut cache = ActuarialCache::default();

    let mut baseline = Vec::with_capacity(seeds);
    let mut stressed = Vec::with_capacity(seeds);
    let mut matched_streams = true;
    for seed_idx in 0..seeds {
        let key = rng::derive_key(config.run.seed, "stress-eval", &[seed_idx as u64]);
        let spec = StrategySpec::Marl(trained);
        let (_, base_series) =
            evaluate_strategy(config, key, eval_episodes, &spec, &mut cache)?;
        let (_, stress_series) =
            evaluate_strategy(&stressed_cfg, key, eval_episodes, &spec, &mut cache)?;

        // Shared-randomness check: every random treaty field and the
        // attritional loss stream must coincide across arms.
        if base_series.treaty_exposures != stress_series.treaty_exposures
            || base_series.attritional_losses != stress_series.attritional_losses
        {
            matched_streams = false;
        }

        let alpha = config.reward.alpha;
        let arm = |series: &crate::experiments::evaluate::EvalSeries| -> Result<StressArmMetrics> {
            let losses: Vec<f64> = series.group_profit.iter().map(|p| -p).collect();
            Ok(StressArmMetrics {
                mean_reward: series.group_reward.iter().sum::<f64>()
                    / series.group_reward.len().max(1) as f64,
                bid_rate_std: population_std(&series.bid_rates),
                cvar95: crate::risk::cvar(&losses, alpha)?,
            })
        };
        baseline.push(arm(&base_series)?);
        stressed.push(arm(&stress_series)?);
    }

    let diffs = |f: &dyn Fn(&StressArmMetrics) -> f64| -> Vec<f64> {
        stressed.iter().zip(baseline.iter()).map(|(s, b)| f(s) - f(b)).collect()
    };
    let reward_diffs = diffs(&|m| m.mean_reward);
    let bid_std_diffs = diffs(&|m| m.bid_rate_std);
    let cvar_diffs = diffs(&|m| m.cvar95);

    let stressed_rewards: Vec<f64> = stressed.iter().map(|m| m.mean_reward).collect();
    let baseline_rewards: Vec<f64> = baseline.iter().map(|m| m.mean_reward).collect();
    let mut bs_rng = rng::stream(config.run.seed, "bootstrap", &[]);
    let bootstrap_reward_diff = bootstrap_ci(
        &stressed_rewards,
        &baseline_rewards,
        bootstrap_resamples,
        0.95,
        &mut bs_rng,
    )?;

    Ok(StressStudyReport {
        regime: regime.kind,
        seeds,
        eval_episodes,
        baseline,
        stressed,
        paired_reward: paired_t(&reward_diffs)?,
        paired_bid_std: paired_t(&bid_std_diffs)?,
        paired_cvar: paired_t(&cvar_diffs)?,
        bootstrap_reward_diff,
        matched_streams,
    })
}
