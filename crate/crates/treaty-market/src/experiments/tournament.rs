//! Baselines tournament: every strategy in the roster is evaluated on the
//! same treaty/loss streams across matched seeds, then compared pairwise
//! with Welch t-tests (per-seed mean profits) and Kolmogorov–Smirnov tests
//! (pooled per-episode rewards).

use serde::{Deserialize, Serialize};

use crate::agents::{ActuarialCache, MappoAgent, QBaselineState};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::evaluate::{evaluate_strategy, EvalSummary, StrategySpec};
use crate::experiments::trainer::train_q_baseline;
use crate::risk::{ks_two_sample, welch_t, StatReport};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Marl,
    Actuarial,
    Random,
    QBaseline,
}

impl StrategyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Marl => "marl",
            StrategyKind::Actuarial => "actuarial",
            StrategyKind::Random => "random",
            StrategyKind::QBaseline => "q_baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub strategy: String,
    /// Per-seed metric summaries, in seed order.
    pub per_seed: Vec<EvalSummary>,
    /// Seed means of the six headline metrics.
    pub mean_profit: f64,
    pub cvar95: f64,
    pub sharpe: f64,
    pub loss_ratio: f64,
    pub diversification: f64,
    pub bid_success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub a: String,
    pub b: String,
    /// Welch t on per-seed mean profits.
    pub welch_profit: StatReport,
    /// K–S on pooled per-episode rewards.
    pub ks_rewards: StatReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentReport {
    pub seeds: usize,
    pub eval_episodes: u64,
    pub rows: Vec<StrategyRow>,
    pub pairwise: Vec<PairwiseComparison>,
}

impl TournamentReport {
    pub fn row(&self, name: &str) -> Option<&StrategyRow> {
        self.rows.iter().find(|r| r.strategy == name)
    }

    pub fn comparison(&self, a: &str, b: &str) -> Option<&PairwiseComparison> {
        self.pairwise
            .iter()
            .find(|c| (c.a == a && c.b == b) || (c.a == b && c.b == a))
    }
}

/// Evaluate the roster on `seeds` matched environment streams.
///
/// A trained MARL roster must be supplied when `marl` appears in the roster;
/// the Q-learning baseline is trained on the spot when requested but not
/// provided.
pub fn run_baseline_tournament(
    config: &RunConfig,
    roster: &[StrategyKind],
    marl: Option<&[MappoAgent]>,
    q_baseline: Option<&[QBaselineState]>,
    seeds: usize,
    eval_episodes: u64,
) -> Result<TournamentReport> {
    if roster.is_empty() {
        return Err(Error::Contract("tournament roster is empty".into()));
    }
    if roster.contains(&StrategyKind::Marl) && marl.is_none() {
        return Err(Error::Contract(
            "roster includes marl but no trained checkpoint was supplied".into(),
        ));
    }
    if seeds == 0 {
        return Err(Error::Contract("tournament needs at least one seed".into()));
    }
    let trained_q: Option<Vec<QBaselineState>> =
        if roster.contains(&StrategyKind::QBaseline) && q_baseline.is_none() {
            Some(train_q_baseline(config)?)
        } else {
            None
        };

    let mut cache = ActuarialCache::default();
    let mut rows: Vec<StrategyRow> = Vec::with_capacity(roster.len());
    let mut pooled_rewards: Vec<Vec<f64>> = vec![Vec::new(); roster.len()];

    for (si, kind) in roster.iter().enumerate() {
        let spec = match kind {
            StrategyKind::Marl => StrategySpec::Marl(marl.unwrap()),
            StrategyKind::Actuarial => {
                StrategySpec::Actuarial { loading: config.algorithm.actuarial_loading }
            }
            StrategyKind::Random => StrategySpec::Random,
            StrategyKind::QBaseline => {
                StrategySpec::QBaseline(q_baseline.or(trained_q.as_deref()).unwrap())
            }
        };
        let mut per_seed = Vec::with_capacity(seeds);
        for seed_idx in 0..seeds {
            let key = rng::derive_key(config.run.seed, "tournament", &[seed_idx as u64]);
            let (summary, series) =
                evaluate_strategy(config, key, eval_episodes, &spec, &mut cache)?;
            pooled_rewards[si].extend_from_slice(&series.rewards_pooled);
            per_seed.push(summary);
        }
        let mean = |f: &dyn Fn(&EvalSummary) -> f64| -> f64 {
            per_seed.iter().map(f).sum::<f64>() / per_seed.len() as f64
        };
        rows.push(StrategyRow {
            strategy: kind.name().to_string(),
            mean_profit: mean(&|s| s.mean_profit),
            cvar95: mean(&|s| s.cvar95),
            sharpe: mean(&|s| s.sharpe),
            loss_ratio: mean(&|s| s.loss_ratio),
            diversification: mean(&|s| s.diversification),
            bid_success_rate: mean(&|s| s.bid_success_rate),
            per_seed,
        });
    }

    let mut pairwise = Vec::new();
    for i in 0..roster.len() {
        for j in (i + 1)..roster.len() {
            let profits_i: Vec<f64> = rows[i].per_seed.iter().map(|s| s.mean_profit).collect();
            let profits_j: Vec<f64> = rows[j].per_seed.iter().map(|s| s.mean_profit).collect();
            pairwise.push(PairwiseComparison {
                a: rows[i].strategy.clone(),
                b: rows[j].strategy.clone(),
                welch_profit: welch_t(&profits_i, &profits_j)?,
                ks_rewards: ks_two_sample(&pooled_rewards[i], &pooled_rewards[j])?,
            });
        }
    }

    Ok(TournamentReport { seeds, eval_episodes, rows, pairwise })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config() -> RunConfig {
        let mut cfg = RunConfig::desk_scale();
        cfg.run.n_agents = 3;
        cfg
    }

    #[test]
    fn marl_without_checkpoint_is_an_error() {
        let cfg = quick_config();
        let err =
            run_baseline_tournament(&cfg, &[StrategyKind::Marl], None, None, 2, 10).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn same_seed_same_report() {
        let cfg = quick_config();
        let roster = [StrategyKind::Random, StrategyKind::Actuarial];
        let r1 = run_baseline_tournament(&cfg, &roster, None, None, 2, 30).unwrap();
        let r2 = run_baseline_tournament(&cfg, &roster, None, None, 2, 30).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn report_has_the_six_metric_columns_and_all_pairs() {
        let cfg = quick_config();
        let roster = [StrategyKind::Random, StrategyKind::Actuarial];
        let r = run_baseline_tournament(&cfg, &roster, None, None, 3, 40).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.pairwise.len(), 1);
        let row = r.row("actuarial").unwrap();
        // All six headline metrics populated and finite.
        for v in [
            row.mean_profit,
            row.cvar95,
            row.sharpe,
            row.loss_ratio,
            row.diversification,
            row.bid_success_rate,
        ] {
            assert!(v.is_finite());
        }
        assert!(r.comparison("random", "actuarial").is_some());
    }
}
