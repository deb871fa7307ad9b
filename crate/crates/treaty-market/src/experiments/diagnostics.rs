//! Learning-curve diagnostics: rolling reward-variance series with a
//! convergence verdict, the critic-architecture ablation, and the post-shock
//! recovery slope.

use serde::{Deserialize, Serialize};

use crate::agents::ActuarialCache;
use crate::config::{CriticMode, RunConfig, StressConfig, StressKind};
use crate::error::{Error, Result};
use crate::experiments::evaluate::{evaluate_strategy, StrategySpec};
use crate::experiments::metrics::EpisodeMetrics;
use crate::experiments::trainer::{train, EvaluationSnapshot};
use crate::risk::{ols_trend, TrendReport};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceDiagnostics {
    pub window: usize,
    /// Rolling variance of per-episode group rewards.
    pub variances: Vec<f64>,
    pub initial_std: f64,
    pub final_std: f64,
    pub trend: TrendReport,
    pub converged: bool,
}

/// Rolling-window reward variance plus a convergence verdict: converged when
/// the final-window std sits below `threshold` and the variance has a
/// significantly decreasing trend (a flat all-equal series below threshold
/// also counts — there is nothing left to decrease).
///
/// The reported series is rolling; the trend test runs on disjoint windows.
/// Overlapping windows are heavily autocorrelated, which makes the OLS
/// p-value anti-conservative and would flag trends in pure noise.
pub fn variance_diagnostics(
    rewards_per_episode: &[f64],
    window: usize,
    threshold: f64,
) -> Result<VarianceDiagnostics> {
    if window < 2 {
        return Err(Error::Contract("variance window must be at least 2".into()));
    }
    if rewards_per_episode.len() < window {
        return Err(Error::Contract(format!(
            "stream of {} episodes is shorter than the {window}-episode window",
            rewards_per_episode.len()
        )));
    }
    let n = rewards_per_episode.len();
    let window_var = |start: usize| -> f64 {
        let slice = &rewards_per_episode[start..start + window];
        let mean = slice.iter().sum::<f64>() / window as f64;
        slice.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / window as f64
    };
    let mut variances = Vec::with_capacity(n - window + 1);
    for start in 0..=(n - window) {
        variances.push(window_var(start));
    }
    let disjoint: Vec<f64> = (0..n / window).map(|k| window_var(k * window)).collect();
    let initial_std = variances.first().copied().unwrap_or(0.0).sqrt();
    let final_std = variances.last().copied().unwrap_or(0.0).sqrt();
    let trend = if disjoint.len() >= 3 {
        ols_trend(&disjoint)?
    } else {
        TrendReport { slope: 0.0, intercept: variances[0], p_value: 1.0 }
    };
    let all_equal = variances.windows(2).all(|w| w[0] == w[1]);
    let decreasing = trend.slope < 0.0 && trend.p_value < 0.05;
    let converged = final_std <= threshold && (all_equal || decreasing);
    Ok(VarianceDiagnostics { window, variances, initial_std, final_std, trend, converged })
}

/// Per-episode group-mean rewards out of a metrics stream.
pub fn group_rewards_per_episode(metrics: &[EpisodeMetrics]) -> Vec<f64> {
    let mut sums: Vec<(u64, f64, usize)> = Vec::new();
    for m in metrics {
        match sums.last_mut() {
            Some((e, sum, count)) if *e == m.episode => {
                *sum += m.reward;
                *count += 1;
            }
            _ => sums.push((m.episode, m.reward, 1)),
        }
    }
    sums.into_iter().map(|(_, s, c)| s / c as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub configuration: String,
    /// Median over seeds of the final-window reward std.
    pub final_std: f64,
    /// "converged" / "not_converged" / "not_applicable".
    pub verdict: String,
    pub per_seed_final_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub window: usize,
    pub threshold: f64,
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

/// Critic-architecture ablation: central critic vs per-agent local critics
/// vs non-learning random bidders, reported as final reward std (seed
/// medians) and convergence verdicts.
pub fn ablation_ctde(
    config: &RunConfig,
    seeds: usize,
    window: usize,
    threshold: f64,
) -> Result<AblationReport> {
    if seeds == 0 {
        return Err(Error::Contract("ablation needs at least one seed".into()));
    }
    use rayon::prelude::*;

    let run_arm = |mode: CriticMode, seed_idx: u64| -> Result<(f64, bool)> {
        let mut cfg = config.clone();
        cfg.algorithm.critic_mode = mode;
        cfg.run.seed = rng::derive_key(config.run.seed, "ablation", &[mode as u64, seed_idx]);
        let out = train(&cfg)?;
        let rewards = group_rewards_per_episode(&out.metrics);
        let diag = variance_diagnostics(&rewards, window, threshold)?;
        Ok((diag.final_std, diag.converged))
    };

    let arms: Vec<(CriticMode, u64)> = [CriticMode::Central, CriticMode::Local]
        .into_iter()
        .flat_map(|m| (0..seeds as u64).map(move |s| (m, s)))
        .collect();
    let learned: Vec<Result<(CriticMode, f64, bool)>> = arms
        .par_iter()
        .map(|&(mode, s)| run_arm(mode, s).map(|(std, conv)| (mode, std, conv)))
        .collect();

    let mut central: Vec<(f64, bool)> = Vec::new();
    let mut local: Vec<(f64, bool)> = Vec::new();
    for r in learned {
        let (mode, std, conv) = r?;
        match mode {
            CriticMode::Central => central.push((std, conv)),
            CriticMode::Local => local.push((std, conv)),
        }
    }

    // Random arm: non-learning bidders rolled on the same episode budget.
    let mut random_stds = Vec::with_capacity(seeds);
    for seed_idx in 0..seeds as u64 {
        let key = rng::derive_key(config.run.seed, "ablation-random", &[seed_idx]);
        let mut cache = ActuarialCache::new(2_000);
        let (_, series) = evaluate_strategy(
            config,
            key,
            config.run.episodes,
            &StrategySpec::Random,
            &mut cache,
        )?;
        let diag = variance_diagnostics(&series.group_reward, window, threshold)?;
        random_stds.push(diag.final_std);
    }

    let verdict = |arm: &[(f64, bool)]| -> String {
        let converged = arm.iter().filter(|(_, c)| *c).count() * 2 > arm.len();
        if converged { "converged".to_string() } else { "not_converged".to_string() }
    };
    let stds = |arm: &[(f64, bool)]| -> Vec<f64> { arm.iter().map(|(s, _)| *s).collect() };

    let rows = vec![
        AblationRow {
            configuration: "central_critic".to_string(),
            final_std: median(&stds(&central)),
            verdict: verdict(&central),
            per_seed_final_std: stds(&central),
        },
        AblationRow {
            configuration: "local_critics".to_string(),
            final_std: median(&stds(&local)),
            verdict: verdict(&local),
            per_seed_final_std: stds(&local),
        },
        AblationRow {
            configuration: "random_bidding".to_string(),
            final_std: median(&random_stds),
            verdict: "not_applicable".to_string(),
            per_seed_final_std: random_stds,
        },
    ];
    Ok(AblationReport { rows, window, threshold })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub shock_window: (u64, u64),
    /// Evaluation snapshots with at_episode strictly after the shock window.
    pub post_shock_evaluations: Vec<(u64, f64)>,
    /// OLS slope of post-shock evaluation rewards against their episode
    /// index, in reward units per episode.
    pub slope_per_episode: f64,
    pub slope_p_value: f64,
}

/// Post-shock recovery slope from a windowed-stress training run's
/// evaluation snapshots.
pub fn recovery_slope(
    evaluations: &[EvaluationSnapshot],
    stress: &StressConfig,
) -> Result<RecoveryReport> {
    if stress.kind == StressKind::None {
        return Err(Error::Contract("recovery diagnostic requires a stress regime".into()));
    }
    let (start, end) = match (stress.window_start, stress.window_end) {
        (Some(s), Some(e)) => (s, e),
        _ => {
            return Err(Error::Contract(
                "recovery diagnostic requires a bounded activation window".into(),
            ))
        }
    };
    let post: Vec<(u64, f64)> = evaluations
        .iter()
        .filter(|s| s.at_episode >= end)
        .map(|s| (s.at_episode, s.mean_reward))
        .collect();
    if post.len() < 3 {
        return Err(Error::Contract(format!(
            "need at least 3 post-shock evaluations, have {}",
            post.len()
        )));
    }
    // OLS against the actual episode indices (unevenly spaced snapshots are
    // fine: regress on episode, not on rank).
    let xs: Vec<f64> = post.iter().map(|(e, _)| *e as f64).collect();
    let ys: Vec<f64> = post.iter().map(|(_, r)| *r).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let df = n - 2.0;
    let p = if ss_res == 0.0 {
        if slope == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        let se = (ss_res / df / sxx).sqrt();
        crate::risk::stats::student_t_two_tailed(slope / se, df)
    };
    Ok(RecoveryReport {
        shock_window: (start, end),
        post_shock_evaluations: post,
        slope_per_episode: slope,
        slope_p_value: p,
    })
}
