//! Run configuration: a hierarchical key-value (TOML) file with sections
//! mirroring the module layout. Unknown keys are hard errors — a silently
//! ignored typo would invalidate an experiment.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Top-level run configuration.
///
/// `RunConfig::default()` reproduces the full-scale settings (10 agents,
/// 10,000 episodes, 3×128 actor / 3×256 critic, Adam at 1e-4/1e-3, γ = 0.99,
/// minibatch 1024, evaluation every 500 episodes). [`RunConfig::desk_scale`]
/// is the small preset used by the test suite and examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub run: RunSection,
    pub environment: EnvConfig,
    pub reward: RewardConfig,
    pub algorithm: AlgorithmConfig,
    pub stress: StressConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub n_agents: usize,
    pub episodes: u64,
    pub evaluation_interval: u64,
    /// Episodes collected between policy updates.
    pub rollout_length: u64,
    /// Episodes per deterministic evaluation snapshot.
    pub eval_episodes: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            n_agents: 10,
            episodes: 10_000,
            evaluation_interval: 500,
            rollout_length: 100,
            eval_episodes: 100,
        }
    }
}

/// Market environment parameters. Loss-model and insurer-preference keys
/// mirror the `TreatySpec` / `InsurerPreferences` field names; treaty
/// generation distributions are named after the field they drive.
///
/// Monetary quantities are expressed in units of the exposure scale
/// (`exposure_mu = 0` puts the median treaty at 1.0). Severity parameters
/// (`attritional_severity_mean`, `cat_scale`) are per unit of exposure and
/// scale with each treaty's drawn exposure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    // Treaty generation (Table-1 features).
    pub exposure_mu: f64,
    pub exposure_sigma: f64,
    pub n_lines: usize,
    pub attachment_frac_min: f64,
    pub attachment_frac_max: f64,
    pub limit_frac_min: f64,
    pub limit_frac_max: f64,
    pub retention_min: f64,
    pub retention_max: f64,
    pub quota_share_prob: f64,

    // Two-part loss model.
    pub attritional_freq: f64,
    pub attritional_severity_mean: f64,
    pub attritional_severity_sigma: f64,
    pub cat_prob: f64,
    pub cat_tail_index: f64,
    pub cat_scale: f64,

    // Insurer preferences.
    pub theta: f64,
    pub sigma_noise: f64,
    pub delta_incumbent: f64,
    pub last_look_enabled: bool,
    pub lambda_insurer: f64,
    /// Fractional premium-rate cut the incumbent applies when revising under
    /// last look.
    pub last_look_rate_cut: f64,

    // Agent capital and participation.
    pub initial_capital: f64,
    /// κ in the participation rule: an agent must hold at least
    /// κ × (worst-case claimable amount) to bid.
    pub capital_requirement_factor: f64,

    // Latency model (not a learned action): each agent gets a fixed median
    // latency at init, jittered lognormally per episode.
    pub latency_mean_min_ms: f64,
    pub latency_mean_max_ms: f64,
    pub latency_sigma: f64,
    pub latency_ref_ms: f64,

    // Admissible action box.
    pub rate_min: f64,
    pub rate_max: f64,
    pub quota_min: f64,
    pub quota_max: f64,
    pub commission_max: f64,
    pub attachment_offset_max: f64,
    pub limit_factor_min: f64,
    pub limit_factor_max: f64,

    // Trailing windows.
    pub trailing_window: usize,
    pub win_rate_window: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            exposure_mu: 0.0,
            exposure_sigma: 0.5,
            n_lines: 4,
            attachment_frac_min: 0.05,
            attachment_frac_max: 0.30,
            limit_frac_min: 0.10,
            limit_frac_max: 0.50,
            retention_min: 0.10,
            retention_max: 0.50,
            quota_share_prob: 0.5,

            attritional_freq: 5.0,
            attritional_severity_mean: 0.03,
            attritional_severity_sigma: 1.0,
            cat_prob: 0.08,
            cat_tail_index: 2.2,
            cat_scale: 0.1,

            theta: 0.1,
            sigma_noise: 0.02,
            delta_incumbent: 0.05,
            last_look_enabled: true,
            lambda_insurer: 1.0,
            last_look_rate_cut: 0.05,

            initial_capital: 1.5,
            capital_requirement_factor: 1.0,

            latency_mean_min_ms: 20.0,
            latency_mean_max_ms: 200.0,
            latency_sigma: 0.3,
            latency_ref_ms: 100.0,

            rate_min: 0.005,
            rate_max: 0.20,
            quota_min: 0.0,
            quota_max: 1.0,
            commission_max: 0.30,
            attachment_offset_max: 0.25,
            limit_factor_min: 0.75,
            limit_factor_max: 1.25,

            trailing_window: 200,
            win_rate_window: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    /// λ — agent risk aversion on the CVaR penalty.
    pub lambda_cvar: f64,
    /// γ_eff — weight on the efficiency score.
    pub gamma_eff: f64,
    /// CVaR confidence level α.
    pub alpha: f64,
    pub efficiency_w1: f64,
    pub efficiency_w2: f64,
    pub efficiency_w3: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            lambda_cvar: 0.1,
            gamma_eff: 0.1,
            alpha: 0.95,
            efficiency_w1: 0.5,
            efficiency_w2: 0.25,
            efficiency_w3: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgorithmConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub update_epochs: usize,
    pub minibatch_size: usize,
    pub entropy_weight: f64,
    pub grad_norm_clip: f64,
    pub log_std_init: f64,
    /// "central" trains one shared critic on the global state (CTDE);
    /// "local" gives each agent a private critic over its own observation.
    pub critic_mode: CriticMode,
    /// Risk loading applied by the static actuarial baseline.
    pub actuarial_loading: f64,

    // Ornstein–Uhlenbeck exploration annealing for MAPPO collection
    // (off by default; the stochastic Gaussian policy is the primary
    // exploration mechanism).
    pub ou_exploration: bool,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    pub ou_dt: f64,

    // Single-agent Q-learning baseline.
    pub q_hidden: Vec<usize>,
    pub q_grid_levels: usize,
    pub q_replay_capacity: usize,
    pub q_batch_size: usize,
    pub q_lr: f64,
    pub q_tau: f64,
    pub q_epsilon_start: f64,
    pub q_epsilon_end: f64,
    pub q_epsilon_decay_episodes: u64,
    pub q_update_every: u64,
    pub q_warmup: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticMode {
    Central,
    Local,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        AlgorithmConfig {
            actor_hidden: vec![128, 128, 128],
            critic_hidden: vec![256, 256, 256],
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            update_epochs: 4,
            minibatch_size: 1024,
            entropy_weight: 0.01,
            grad_norm_clip: 0.5,
            log_std_init: -0.7,
            critic_mode: CriticMode::Central,
            actuarial_loading: 0.2,

            ou_exploration: false,
            ou_theta: 0.15,
            ou_sigma: 0.2,
            ou_dt: 1.0,

            q_hidden: vec![64, 64],
            q_grid_levels: 5,
            q_replay_capacity: 1_000_000,
            q_batch_size: 64,
            q_lr: 1e-3,
            q_tau: 0.005,
            q_epsilon_start: 1.0,
            q_epsilon_end: 0.05,
            q_epsilon_decay_episodes: 1_000,
            q_update_every: 1,
            q_warmup: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StressKind {
    #[default]
    None,
    Catastrophe,
    Capacity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StressConfig {
    pub kind: StressKind,
    /// Applied to catastrophe occurrence probability (saturating at 1) and
    /// severity scale.
    pub cat_multiplier: f64,
    /// Applied to all agent capital.
    pub capacity_factor: f64,
    /// Activation window `[window_start, window_end)` in episodes; both
    /// absent means the whole run.
    pub window_start: Option<u64>,
    pub window_end: Option<u64>,
}

impl Default for StressConfig {
    fn default() -> Self {
        StressConfig {
            kind: StressKind::None,
            cat_multiplier: 3.0,
            capacity_factor: 0.7,
            window_start: None,
            window_end: None,
        }
    }
}

impl StressConfig {
    /// Is the regime active at this episode index?
    pub fn active_at(&self, episode: u64) -> bool {
        if self.kind == StressKind::None {
            return false;
        }
        let start = self.window_start.unwrap_or(0);
        let end = self.window_end.unwrap_or(u64::MAX);
        episode >= start && episode < end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".to_string() }
    }
}

impl RunConfig {
    /// Small preset: 3 agents, 1,500 episodes, (64, 64) networks, rollout 32.
    /// Runs end to end in seconds; the full-scale defaults stay available
    /// through `RunConfig::default()` or a config file.
    pub fn desk_scale() -> Self {
        let mut cfg = RunConfig::default();
        cfg.run.n_agents = 3;
        cfg.run.episodes = 1_500;
        cfg.run.evaluation_interval = 500;
        cfg.run.rollout_length = 32;
        cfg.run.eval_episodes = 60;
        cfg.algorithm.actor_hidden = vec![64, 64];
        cfg.algorithm.critic_hidden = vec![64, 64];
        cfg.algorithm.actor_lr = 3e-4;
        cfg.algorithm.critic_lr = 1e-3;
        cfg.algorithm.minibatch_size = 96;
        cfg.algorithm.q_replay_capacity = 20_000;
        cfg.algorithm.q_hidden = vec![64, 64];
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    /// Reject invalid parameters before any simulation starts.
    pub fn validate(&self) -> Result<()> {
        let e = &self.environment;
        let mut problems: Vec<String> = Vec::new();
        if self.run.n_agents == 0 {
            problems.push("run.n_agents must be positive".into());
        }
        if self.run.rollout_length == 0 {
            problems.push("run.rollout_length must be positive".into());
        }
        if self.run.evaluation_interval == 0 {
            problems.push("run.evaluation_interval must be positive".into());
        }
        if e.exposure_sigma < 0.0 {
            problems.push("environment.exposure_sigma must be >= 0".into());
        }
        if e.n_lines == 0 {
            problems.push("environment.n_lines must be positive".into());
        }
        if e.cat_tail_index <= 1.0 {
            problems.push(format!(
                "environment.cat_tail_index must exceed 1 for a finite mean (got {})",
                e.cat_tail_index
            ));
        }
        if !(0.0..=1.0).contains(&e.cat_prob) {
            problems.push("environment.cat_prob must lie in [0, 1]".into());
        }
        if e.cat_scale <= 0.0 {
            problems.push("environment.cat_scale must be positive".into());
        }
        if e.attritional_freq < 0.0 {
            problems.push("environment.attritional_freq must be >= 0".into());
        }
        if e.attritional_severity_mean <= 0.0 {
            problems.push("environment.attritional_severity_mean must be positive".into());
        }
        if e.attritional_severity_sigma <= 0.0 {
            problems.push("environment.attritional_severity_sigma must be positive".into());
        }
        if !(0.0..1.0).contains(&e.delta_incumbent) {
            problems.push("environment.delta_incumbent must lie in [0, 1)".into());
        }
        if e.sigma_noise < 0.0 {
            problems.push("environment.sigma_noise must be >= 0".into());
        }
        if e.theta < 0.0 {
            problems.push("environment.theta must be >= 0".into());
        }
        if e.lambda_insurer < 0.0 {
            problems.push("environment.lambda_insurer must be >= 0".into());
        }
        if !(e.retention_min >= 0.0 && e.retention_max <= 1.0 && e.retention_min <= e.retention_max)
        {
            problems.push("environment.retention range must satisfy 0 <= min <= max <= 1".into());
        }
        if e.attachment_frac_min > e.attachment_frac_max || e.attachment_frac_min < 0.0 {
            problems.push("environment.attachment_frac range invalid".into());
        }
        if e.limit_frac_min > e.limit_frac_max || e.limit_frac_min <= 0.0 {
            problems.push("environment.limit_frac range invalid".into());
        }
        if e.rate_min >= e.rate_max || e.rate_min < 0.0 {
            problems.push("environment rate box invalid (need 0 <= rate_min < rate_max)".into());
        }
        if e.quota_min >= e.quota_max || e.quota_min < 0.0 || e.quota_max > 1.0 {
            problems.push("environment quota box invalid".into());
        }
        if e.commission_max <= 0.0 {
            problems.push("environment.commission_max must be positive".into());
        }
        if e.attachment_offset_max <= 0.0 || e.attachment_offset_max >= 1.0 {
            problems.push("environment.attachment_offset_max must lie in (0, 1)".into());
        }
        if e.limit_factor_min >= e.limit_factor_max || e.limit_factor_min <= 0.0 {
            problems.push("environment limit_factor box invalid".into());
        }
        if e.initial_capital <= 0.0 {
            problems.push("environment.initial_capital must be positive".into());
        }
        if e.trailing_window == 0 || e.win_rate_window == 0 {
            problems.push("environment trailing windows must be positive".into());
        }

        let r = &self.reward;
        if !(0.0..1.0).contains(&r.alpha) {
            problems.push("reward.alpha must lie in [0, 1)".into());
        }
        if r.lambda_cvar < 0.0 || r.gamma_eff < 0.0 {
            problems.push("reward.lambda_cvar and reward.gamma_eff must be >= 0".into());
        }
        let wsum = r.efficiency_w1 + r.efficiency_w2 + r.efficiency_w3;
        if (wsum - 1.0).abs() > 1e-12 {
            problems.push(format!("reward efficiency weights must sum to 1 (got {wsum})"));
        }
        if r.efficiency_w1 < 0.0 || r.efficiency_w2 < 0.0 || r.efficiency_w3 < 0.0 {
            problems.push("reward efficiency weights must be >= 0".into());
        }

        let a = &self.algorithm;
        if a.actor_lr <= 0.0 || a.critic_lr <= 0.0 || a.q_lr <= 0.0 {
            problems.push("algorithm learning rates must be positive".into());
        }
        if !(0.0..=1.0).contains(&a.gamma) {
            problems.push("algorithm.gamma must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&a.gae_lambda) {
            problems.push("algorithm.gae_lambda must lie in [0, 1]".into());
        }
        if a.clip_epsilon <= 0.0 {
            problems.push("algorithm.clip_epsilon must be positive".into());
        }
        if a.q_grid_levels < 2 {
            problems.push("algorithm.q_grid_levels must be at least 2".into());
        }
        if a.actuarial_loading < 0.0 {
            problems.push("algorithm.actuarial_loading must be >= 0".into());
        }
        if !(0.0..=1.0).contains(&a.q_tau) {
            problems.push("algorithm.q_tau must lie in [0, 1]".into());
        }

        let s = &self.stress;
        if s.cat_multiplier <= 0.0 || s.capacity_factor <= 0.0 {
            problems.push("stress multipliers must be positive".into());
        }
        if let (Some(ws), Some(we)) = (s.window_start, s.window_end) {
            if ws >= we {
                problems.push("stress window_start must precede window_end".into());
            }
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_reproduce_full_scale_settings() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.run.n_agents, 10);
        assert_eq!(cfg.run.episodes, 10_000);
        assert_eq!(cfg.run.evaluation_interval, 500);
        assert_eq!(cfg.algorithm.actor_hidden, vec![128, 128, 128]);
        assert_eq!(cfg.algorithm.critic_hidden, vec![256, 256, 256]);
        assert_eq!(cfg.algorithm.actor_lr, 1e-4);
        assert_eq!(cfg.algorithm.critic_lr, 1e-3);
        assert_eq!(cfg.algorithm.gamma, 0.99);
        assert_eq!(cfg.algorithm.minibatch_size, 1024);
        assert_eq!(cfg.algorithm.q_replay_capacity, 1_000_000);
        assert_eq!(cfg.algorithm.q_tau, 0.005);
        assert_eq!(cfg.algorithm.ou_theta, 0.15);
        assert_eq!(cfg.algorithm.ou_sigma, 0.2);
        assert_eq!(cfg.reward.alpha, 0.95);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn desk_preset_validates() {
        let cfg = RunConfig::desk_scale();
        assert_eq!(cfg.run.n_agents, 3);
        assert_eq!(cfg.run.episodes, 1_500);
        assert_eq!(cfg.run.rollout_length, 32);
        assert_eq!(cfg.algorithm.actor_hidden, vec![64, 64]);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[run]\nseed = 1\nn_agnets = 3\n";
        let err = RunConfig::from_toml_str(text).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "got {err:?}");
    }

    #[test]
    fn invalid_tail_index_is_a_startup_error() {
        let text = "[environment]\ncat_tail_index = 0.9\n";
        let err = RunConfig::from_toml_str(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("cat_tail_index"), "message was: {msg}");
    }

    #[test]
    fn partial_file_fills_in_defaults() {
        let text = "[run]\nseed = 9\nepisodes = 50\n\n[reward]\nlambda_cvar = 1.0\n";
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.run.seed, 9);
        assert_eq!(cfg.run.episodes, 50);
        assert_eq!(cfg.reward.lambda_cvar, 1.0);
        assert_eq!(cfg.run.n_agents, 10);
    }

    #[test]
    fn stress_window_activation() {
        let mut s = StressConfig::default();
        assert!(!s.active_at(0));
        s.kind = StressKind::Catastrophe;
        assert!(s.active_at(0) && s.active_at(10_000));
        s.window_start = Some(600);
        s.window_end = Some(700);
        assert!(!s.active_at(599) && s.active_at(600) && s.active_at(699) && !s.active_at(700));
    }
}
