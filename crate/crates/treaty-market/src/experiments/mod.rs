//! The runnable surface: training, evaluation, the baselines tournament,
//! stress studies, sweeps, diagnostics, and all file outputs.

pub mod diagnostics;
pub mod evaluate;
pub mod manifest;
pub mod metrics;
pub mod stress;
pub mod sweeps;
pub mod tournament;
pub mod trainer;

pub use diagnostics::{
    ablation_ctde, group_rewards_per_episode, recovery_slope, variance_diagnostics,
    AblationReport, RecoveryReport, VarianceDiagnostics,
};
pub use evaluate::{evaluate_strategy, EvalSeries, EvalSummary, StrategySpec};
pub use manifest::{RunManifest, RunSummary};
pub use metrics::EpisodeMetrics;
pub use stress::{apply_stress, run_stress_study, StressArmMetrics, StressStudyReport};
pub use sweeps::{sweep_hyperparams, sweep_lambda, HparamReport, LambdaSweepReport};
pub use tournament::{run_baseline_tournament, StrategyKind, TournamentReport};
pub use trainer::{
    run_training, train, train_q_baseline, EvaluationSnapshot, RunPaths, TrainOutput, Trainer,
};
