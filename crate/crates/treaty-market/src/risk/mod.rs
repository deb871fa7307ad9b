//! Scalar performance and risk measures, plus the statistical test kernel
//! used by the tournament, sweeps, and stress studies.

pub mod stats;

pub use stats::{
    anova_one_way, bootstrap_ci, ks_two_sample, ols_trend, paired_t, welch_t, AnovaReport,
    StatMethod, StatReport, TrendReport,
};

use serde::{Deserialize, Serialize};

use crate::config::RewardConfig;
use crate::error::{Error, Result};

/// Reward-shaping weights: λ on the CVaR penalty, γ_eff on the efficiency
/// score, the CVaR confidence level, and the three efficiency weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub lambda_cvar: f64,
    pub gamma_eff: f64,
    pub alpha: f64,
    pub efficiency_weights: [f64; 3],
}

impl RewardWeights {
    pub fn new(
        lambda_cvar: f64,
        gamma_eff: f64,
        alpha: f64,
        efficiency_weights: [f64; 3],
    ) -> Result<Self> {
        if lambda_cvar < 0.0 || gamma_eff < 0.0 {
            return Err(Error::Config("reward weights must be non-negative".into()));
        }
        if !(0.0 < alpha && alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let sum: f64 = efficiency_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "efficiency weights must sum to 1 within 1e-12, got {sum}"
            )));
        }
        if efficiency_weights.iter().any(|w| *w < 0.0) {
            return Err(Error::Config("efficiency weights must be non-negative".into()));
        }
        Ok(RewardWeights { lambda_cvar, gamma_eff, alpha, efficiency_weights })
    }

    pub fn from_config(cfg: &RewardConfig) -> Result<Self> {
        Self::new(
            cfg.lambda_cvar,
            cfg.gamma_eff,
            cfg.alpha,
            [cfg.efficiency_w1, cfg.efficiency_w2, cfg.efficiency_w3],
        )
    }
}

/// Empirical CVaR: the mean of the worst `⌈(1−alpha)·n⌉` losses.
///
/// Samples are losses (larger = worse). `alpha = 0` degenerates to the plain
/// mean. The tail count uses a small epsilon guard so binary rounding of
/// `(1−alpha)·n` cannot inflate the tail by one element.
pub fn cvar(samples: &[f64], alpha: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples("cvar requires at least one sample".into()));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Contract(format!("cvar alpha must lie in [0, 1), got {alpha}")));
    }
    let n = samples.len();
    let k = (((1.0 - alpha) * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let k = k.min(n);
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[..k].iter().sum::<f64>() / k as f64)
}

/// Per-episode reward: profit − λ·CVaR + γ_eff·efficiency.
pub fn reward(profit: f64, cvar_estimate: f64, efficiency: f64, weights: &RewardWeights) -> f64 {
    profit - weights.lambda_cvar * cvar_estimate + weights.gamma_eff * efficiency
}

/// Convex combination of win rate, inverse latency, and cost score.
///
/// All three inputs must lie in [0, 1]; the weights must sum to 1 within
/// 1e-9 (checked here because callers may pass ad-hoc triples).
pub fn efficiency(
    win_rate: f64,
    inv_latency: f64,
    cost_score: f64,
    weights: [f64; 3],
) -> Result<f64> {
    for (name, v) in [("win_rate", win_rate), ("inv_latency", inv_latency), ("cost_score", cost_score)]
    {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Contract(format!("efficiency input {name} out of [0,1]: {v}")));
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Contract(format!(
            "efficiency weights must sum to 1 within 1e-9, got {sum}"
        )));
    }
    Ok(weights[0] * win_rate + weights[1] * inv_latency + weights[2] * cost_score)
}

/// Claims paid over premium earned.
pub fn loss_ratio(claims_paid: f64, premium_earned: f64) -> Result<f64> {
    if premium_earned <= 0.0 {
        return Err(Error::Contract(format!(
            "loss ratio undefined for premium_earned <= 0 (got {premium_earned})"
        )));
    }
    Ok(claims_paid / premium_earned)
}

/// Mean over population standard deviation of per-episode profits, zero
/// risk-free rate.
pub fn sharpe(per_episode_profits: &[f64]) -> Result<f64> {
    if per_episode_profits.len() < 2 {
        return Err(Error::EmptySamples("sharpe requires at least two samples".into()));
    }
    let n = per_episode_profits.len() as f64;
    let mean = per_episode_profits.iter().sum::<f64>() / n;
    let var = per_episode_profits.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if var == 0.0 {
        return Err(Error::Degenerate("sharpe undefined for zero-dispersion profits".into()));
    }
    Ok(mean / var.sqrt())
}

/// Portfolio diversification as one minus the Herfindahl index of premium
/// share by line.
pub fn diversification(premium_by_line: &[f64]) -> Result<f64> {
    let total: f64 = premium_by_line.iter().sum();
    if total <= 0.0 {
        return Err(Error::Contract("diversification requires positive total premium".into()));
    }
    let hhi: f64 = premium_by_line.iter().map(|p| (p / total).powi(2)).sum();
    Ok(1.0 - hhi)
}

/// Non-dominated subset of (profit, cvar) points: keep `p` unless some `q`
/// has `q.profit >= p.profit` and `q.cvar <= p.cvar` with at least one
/// strict. Output sorted by cvar ascending.
pub fn pareto_frontier(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut sorted = points.to_vec();
    // cvar ascending, then profit descending; exact duplicates stay adjacent.
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(b.0.total_cmp(&a.0)));
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut best_profit = f64::NEG_INFINITY;
    for p in sorted {
        let duplicate_of_kept = out.last() == Some(&p);
        if p.0 > best_profit || duplicate_of_kept {
            best_profit = best_profit.max(p.0);
            out.push(p);
        }
    }
    out
}
