//! Command-line surface. The binary stays thin: every subcommand maps onto
//! a library entry point and writes its report under the output directory.
//!
//! Seed precedence: config file < `TREATY_MARKET_SEED` environment variable
//! < `--seed` flag.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::agents::MappoAgent;
use crate::config::{RunConfig, StressKind};
use crate::error::{Error, Result};
use crate::experiments::{
    ablation_ctde, group_rewards_per_episode, metrics, recovery_slope, run_baseline_tournament,
    run_stress_study, run_training, sweep_hyperparams, sweep_lambda, variance_diagnostics,
    StrategyKind,
};

pub const SEED_ENV_VAR: &str = "TREATY_MARKET_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "treaty-market",
    version,
    about = "Reinsurance treaty bidding: market simulation, learning agents, and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// Run configuration file (TOML); desk-scale defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides config and the environment variable).
    #[arg(long)]
    seed: Option<u64>,
    /// Episode budget override.
    #[arg(long)]
    episodes: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stress regime override.
    #[arg(long, value_enum)]
    stress: Option<StressArg>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum StressArg {
    None,
    Catastrophe,
    Capacity,
}

impl From<StressArg> for StressKind {
    fn from(v: StressArg) -> StressKind {
        match v {
            StressArg::None => StressKind::None,
            StressArg::Catastrophe => StressKind::Catastrophe,
            StressArg::Capacity => StressKind::Capacity,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the MAPPO agents and write metrics, logs, checkpoints, and the
    /// run manifest.
    Train(CommonArgs),
    /// Train, then benchmark the learned policies against the baselines on
    /// matched seeds.
    Tournament {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated roster.
        #[arg(long, default_value = "marl,actuarial,random")]
        roster: String,
        /// Matched evaluation seeds.
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        /// Evaluation episodes per seed.
        #[arg(long, default_value_t = 300)]
        eval_episodes: u64,
    },
    /// Train per risk-aversion λ and report the risk-return frontier.
    SweepLambda {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated λ values.
        #[arg(long, default_value = "0.01,0.1,1.0,10.0")]
        lambdas: String,
        #[arg(long, default_value_t = 3)]
        seeds: usize,
        #[arg(long, default_value_t = 300)]
        eval_episodes: u64,
    },
    /// Grid sensitivity study over key hyperparameters with one-way ANOVA.
    SweepHparams {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 3)]
        seeds: usize,
    },
    /// Matched-seed stress study (requires a catastrophe or capacity
    /// regime).
    Stress {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long, default_value_t = 200)]
        eval_episodes: u64,
        #[arg(long, default_value_t = 1000)]
        resamples: usize,
    },
    /// Critic-architecture ablation (central vs local critics vs random).
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long, default_value_t = 100)]
        window: usize,
        #[arg(long, default_value_t = 1.0)]
        threshold: f64,
    },
    /// Reward-variance diagnostics on an existing metrics stream (or a fresh
    /// run when none exists under the output directory).
    Diagnose {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 100)]
        window: usize,
        #[arg(long, default_value_t = 1.0)]
        threshold: f64,
    },
}

fn resolve_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::desk_scale(),
    };
    // Seed precedence: config < environment < flag.
    if let Ok(value) = std::env::var(SEED_ENV_VAR) {
        let parsed: u64 = value.parse().map_err(|_| {
            Error::Config(format!("{SEED_ENV_VAR} must be an unsigned integer, got '{value}'"))
        })?;
        cfg.run.seed = parsed;
    }
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
    }
    if let Some(episodes) = common.episodes {
        cfg.run.episodes = episodes;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.display().to_string();
    }
    if let Some(stress) = common.stress {
        cfg.stress.kind = stress.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_report<T: serde::Serialize>(dir: &str, name: &str, report: &T) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.to_string(), e))?;
    let path = Path::new(dir).join(name);
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Contract(format!("report serialization: {e}")))?;
    std::fs::write(&path, json).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(path)
}

fn parse_roster(text: &str) -> Result<Vec<StrategyKind>> {
    text.split(',')
        .map(|s| match s.trim() {
            "marl" => Ok(StrategyKind::Marl),
            "actuarial" => Ok(StrategyKind::Actuarial),
            "random" => Ok(StrategyKind::Random),
            "q_baseline" | "q-baseline" => Ok(StrategyKind::QBaseline),
            other => Err(Error::Config(format!("unknown roster entry '{other}'"))),
        })
        .collect()
}

fn train_marl(cfg: &RunConfig) -> Result<Vec<MappoAgent>> {
    Ok(crate::experiments::train(cfg)?.agents)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(common) => {
            let cfg = resolve_config(&common)?;
            let (manifest, _) = run_training(&cfg)?;
            println!(
                "trained {} episodes ({} updates); final eval mean reward {:.4}; outputs in {}",
                manifest.summary.episodes,
                manifest.summary.updates,
                manifest.summary.final_eval_mean_reward,
                cfg.output.dir
            );
        }
        Command::Tournament { common, roster, seeds, eval_episodes } => {
            let cfg = resolve_config(&common)?;
            let roster = parse_roster(&roster)?;
            let marl = if roster.contains(&StrategyKind::Marl) {
                Some(train_marl(&cfg)?)
            } else {
                None
            };
            let report = run_baseline_tournament(
                &cfg,
                &roster,
                marl.as_deref(),
                None,
                seeds,
                eval_episodes,
            )?;
            let path = write_report(&cfg.output.dir, "tournament.json", &report)?;
            for row in &report.rows {
                println!(
                    "{:<12} profit {:>9.5}  cvar95 {:>9.5}  sharpe {:>7.3}  loss_ratio {:>6.3}  divers. {:>5.3}  win_rate {:>6.3}",
                    row.strategy,
                    row.mean_profit,
                    row.cvar95,
                    row.sharpe,
                    row.loss_ratio,
                    row.diversification,
                    row.bid_success_rate
                );
            }
            println!("report written to {}", path.display());
        }
        Command::SweepLambda { common, lambdas, seeds, eval_episodes } => {
            let cfg = resolve_config(&common)?;
            let lambdas: Vec<f64> = lambdas
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad lambda '{s}'")))
                })
                .collect::<Result<_>>()?;
            let report = sweep_lambda(&cfg, &lambdas, seeds, eval_episodes)?;
            let path = write_report(&cfg.output.dir, "lambda_sweep.json", &report)?;
            for cell in &report.cells {
                println!(
                    "lambda {:>7.3}: mean profit {:>9.5}, mean cvar95 {:>9.5}",
                    cell.lambda, cell.mean_profit, cell.mean_cvar95
                );
            }
            println!("report written to {}", path.display());
        }
        Command::SweepHparams { common, seeds } => {
            let cfg = resolve_config(&common)?;
            let grid = default_hparam_grid(&cfg);
            let report = sweep_hyperparams(&grid, seeds, cfg.run.seed)?;
            let path = write_report(&cfg.output.dir, "hparam_sweep.json", &report)?;
            for cell in &report.cells {
                println!("{:<18} final reward {:>9.5} ± {:.5}", cell.name, cell.mean, cell.std);
            }
            match &report.anova {
                Some(a) => println!(
                    "one-way ANOVA: F({}, {}) = {:.4}, p = {:.3e}",
                    a.df_between, a.df_within, a.f_statistic, a.p_value
                ),
                None => println!("one-way ANOVA: undefined for this grid (flagged degenerate)"),
            }
            println!("report written to {}", path.display());
        }
        Command::Stress { common, seeds, eval_episodes, resamples } => {
            let cfg = resolve_config(&common)?;
            if cfg.stress.kind == StressKind::None {
                return Err(Error::Config(
                    "stress study needs --stress catastrophe|capacity or a config regime".into(),
                ));
            }
            let regime = cfg.stress.clone();
            let mut base_cfg = cfg.clone();
            base_cfg.stress.kind = StressKind::None;
            let agents = train_marl(&base_cfg)?;
            let report =
                run_stress_study(&base_cfg, &regime, &agents, seeds, eval_episodes, resamples)?;
            let path = write_report(&cfg.output.dir, "stress_study.json", &report)?;
            println!(
                "{:?} stress over {} seeds: Δreward t = {:.3} (p = {:.3e}), bootstrap CI [{:.5}, {:.5}]",
                report.regime,
                report.seeds,
                report.paired_reward.statistic,
                report.paired_reward.p_value,
                report.bootstrap_reward_diff.ci_low.unwrap_or(f64::NAN),
                report.bootstrap_reward_diff.ci_high.unwrap_or(f64::NAN)
            );
            println!("report written to {}", path.display());
        }
        Command::Ablate { common, seeds, window, threshold } => {
            let cfg = resolve_config(&common)?;
            let report = ablation_ctde(&cfg, seeds, window, threshold)?;
            let path = write_report(&cfg.output.dir, "ablation.json", &report)?;
            for row in &report.rows {
                println!(
                    "{:<16} final std {:>9.5}  verdict {}",
                    row.configuration, row.final_std, row.verdict
                );
            }
            println!("report written to {}", path.display());
        }
        Command::Diagnose { common, window, threshold } => {
            let cfg = resolve_config(&common)?;
            let metrics_path = Path::new(&cfg.output.dir).join("metrics.csv");
            let (rows, evaluations) = if metrics_path.exists() {
                (metrics::read_csv(&metrics_path)?, None)
            } else {
                let (_, out) = run_training(&cfg)?;
                (out.metrics, Some(out.evaluations))
            };
            let rewards = group_rewards_per_episode(&rows);
            let diag = variance_diagnostics(&rewards, window, threshold)?;
            let path = write_report(&cfg.output.dir, "diagnostics.json", &diag)?;
            println!(
                "variance over {} episodes: initial std {:.5}, final std {:.5}, trend slope {:.3e} (p = {:.3e}), {}",
                rewards.len(),
                diag.initial_std,
                diag.final_std,
                diag.trend.slope,
                diag.trend.p_value,
                if diag.converged { "converged" } else { "not converged" }
            );
            if cfg.stress.kind != StressKind::None && cfg.stress.window_end.is_some() {
                if let Some(evals) = evaluations {
                    let recovery = recovery_slope(&evals, &cfg.stress)?;
                    let rpath = write_report(&cfg.output.dir, "recovery.json", &recovery)?;
                    println!(
                        "post-shock recovery slope: {:+.4} reward/episode (p = {:.3e}); report {}",
                        recovery.slope_per_episode,
                        recovery.slope_p_value,
                        rpath.display()
                    );
                }
            }
            println!("report written to {}", path.display());
        }
    }
    Ok(())
}

/// One-factor-at-a-time variations around a base config: actor learning
/// rate, discount factor, and minibatch size, two levels each (six cells).
pub fn default_hparam_grid(base: &RunConfig) -> Vec<(String, RunConfig)> {
    let mut grid = Vec::new();
    let mut push = |name: &str, f: &dyn Fn(&mut RunConfig)| {
        let mut cfg = base.clone();
        f(&mut cfg);
        grid.push((name.to_string(), cfg));
    };
    push("actor_lr_low", &|c| c.algorithm.actor_lr = base.algorithm.actor_lr * 0.5);
    push("actor_lr_high", &|c| c.algorithm.actor_lr = base.algorithm.actor_lr * 2.0);
    push("gamma_low", &|c| c.algorithm.gamma = 0.95);
    push("gamma_high", &|c| c.algorithm.gamma = 0.99);
    push("minibatch_small", &|c| {
        c.algorithm.minibatch_size = (base.algorithm.minibatch_size / 2).max(1)
    });
    push("minibatch_large", &|c| c.algorithm.minibatch_size = base.algorithm.minibatch_size * 2);
    grid
}

/// Entry point for the thin binary: returns the process exit code and prints
/// a single machine-parsable error line on failure.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Usage and version requests exit 0; bad flags exit nonzero with
            // clap's usage text.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_subcommand_is_rejected() {
        assert_ne!(cli_main(["treaty-market", "frobnicate"]), 0);
        assert_ne!(cli_main(["treaty-market", "train", "--no-such-flag"]), 0);
    }

    #[test]
    fn missing_config_file_names_the_path() {
        let common = CommonArgs {
            config: Some(PathBuf::from("/definitely/not/here.toml")),
            seed: None,
            episodes: None,
            out: None,
            stress: None,
        };
        let err = resolve_config(&common).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("/definitely/not/here.toml"), "message: {msg}");
    }

    #[test]
    fn roster_parsing() {
        let r = parse_roster("marl, actuarial,random").unwrap();
        assert_eq!(r, vec![StrategyKind::Marl, StrategyKind::Actuarial, StrategyKind::Random]);
        assert!(parse_roster("marl,nonsense").is_err());
    }

    #[test]
    fn hparam_grid_has_six_cells() {
        let grid = default_hparam_grid(&RunConfig::desk_scale());
        assert_eq!(grid.len(), 6);
        let names: Vec<&str> = grid.iter().map(|(n, _)| n.as_str()).collect();
        assert!(names.contains(&"gamma_low"));
    }
}
