//! The training loop: collect rollouts episode by episode, update policies
//! on a fixed cadence, snapshot evaluations, and persist checkpoints that
//! resume bit-exactly.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{
    global_state, mappo_update, CriticStack, GaussianPolicy, MappoAgent, QBaselineState,
    QGrid, QTransition, UpdateStats,
};
use crate::agents::policy::ActMode;
use crate::agents::qlearn::grid_bid_action;
use crate::config::{CriticMode, RunConfig, StressKind};
use crate::error::{Error, Result};
use crate::experiments::manifest::{unix_now, RunManifest, RunSummary};
use crate::experiments::metrics::{self, EpisodeMetrics};
use crate::learn::{Checkpoint, OuProcess};
use crate::market::bid::ACTION_DIM;
use crate::market::{Bid, EpisodeLogRecord, MarketEnv};
use crate::rng;

/// Deterministic-policy evaluation summary taken every
/// `evaluation_interval` episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSnapshot {
    pub at_episode: u64,
    pub eval_episodes: u64,
    /// Mean reward per agent-episode.
    pub mean_reward: f64,
    pub mean_profit: f64,
    pub per_agent_mean_reward: Vec<f64>,
}

/// (per-agent observation features, global state, per-agent values).
type StateView = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>);

#[derive(Debug)]
pub struct EpisodeStepOutput {
    pub metrics: Vec<EpisodeMetrics>,
    pub log: EpisodeLogRecord,
    pub update: Option<UpdateStats>,
}

/// One MAPPO training stack: environment, per-agent actors, critic, and the
/// rollout buffer, all derived from a single master seed.
#[derive(Debug)]
pub struct Trainer {
    pub config: RunConfig,
    pub env: MarketEnv,
    pub agents: Vec<MappoAgent>,
    pub critic: CriticStack,
    buffer: crate::agents::RolloutBuffer,
    ou: Option<Vec<OuProcess>>,
    episode: u64,
    update_count: u64,
}

impl Trainer {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let master = config.run.seed;
        let n_agents = config.run.n_agents;
        let env = MarketEnv::new(config, rng::derive_key(master, "train-env", &[]), config.run.episodes)?;
        let obs_dim = env.observation_dim();
        let action_box = env.bid_box().action_box();
        let alg = &config.algorithm;

        let mut init_rng = rng::stream(master, "init", &[]);
        let agents: Vec<MappoAgent> = (0..n_agents)
            .map(|_| {
                let policy = GaussianPolicy::new(
                    obs_dim,
                    &alg.actor_hidden,
                    action_box.clone(),
                    alg.log_std_init,
                    &mut init_rng,
                )?;
                Ok(MappoAgent::new(policy, alg.actor_lr))
            })
            .collect::<Result<_>>()?;

        let global_dim =
            crate::market::treaty_feature_dim(config.environment.n_lines) + n_agents * obs_dim;
        let critic = match alg.critic_mode {
            CriticMode::Central => CriticStack::new_central(
                global_dim,
                n_agents,
                &alg.critic_hidden,
                alg.critic_lr,
                &mut init_rng,
            )?,
            CriticMode::Local => CriticStack::new_local(
                obs_dim,
                n_agents,
                &alg.critic_hidden,
                alg.critic_lr,
                &mut init_rng,
            )?,
        };

        let ou = if alg.ou_exploration {
            Some(
                (0..n_agents)
                    .map(|_| OuProcess::new(alg.ou_theta, alg.ou_sigma, alg.ou_dt, ACTION_DIM))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };

        Ok(Trainer {
            config: config.clone(),
            env,
            agents,
            critic,
            buffer: crate::agents::RolloutBuffer::new(
                n_agents,
                config.run.rollout_length as usize,
            ),
            ou,
            episode: 0,
            update_count: 0,
        })
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    fn values_for_current_state(&self) -> Result<StateView> {
        let observations = self.env.observe_all()?;
        let global = global_state(&observations, &self.env.treaty_features())?;
        let values = (0..self.agents.len())
            .map(|a| self.critic.value(a, &observations[a].features, &global))
            .collect::<Result<Vec<_>>>()?;
        let obs_features = observations.into_iter().map(|o| o.features).collect();
        Ok((obs_features, global, values))
    }

    /// Advance one episode: observe, act, step the market, store
    /// transitions, and run a policy update when the rollout is full.
    pub fn step_episode(&mut self) -> Result<EpisodeStepOutput> {
        let master = self.config.run.seed;
        let episode = self.episode;
        let (obs_features, global, values) = self.values_for_current_state()?;
        let gate = self.env.participation();
        let kind = self.env.current_treaty().treaty_kind;
        let bid_box = self.env.bid_box().clone();

        let mut bids: Vec<Option<Bid>> = vec![None; self.agents.len()];
        let mut samples = Vec::with_capacity(self.agents.len());
        for (agent_idx, agent) in self.agents.iter().enumerate() {
            let mut act_rng = rng::stream(master, "policy", &[agent_idx as u64, episode]);
            let obs = crate::market::Observation { features: obs_features[agent_idx].clone() };
            let mut sample = agent.policy.act(&obs, &mut act_rng, ActMode::Stochastic)?;
            if let Some(ou) = self.ou.as_mut() {
                // Exploration annealing: shift the pre-squash sample by
                // temporally correlated noise whose amplitude decays
                // linearly to zero over the run, then refresh the squashed
                // action. The stored log-prob stays the Gaussian density at
                // the shifted point.
                let anneal =
                    1.0 - (episode as f64 / self.config.run.episodes.max(1) as f64).min(1.0);
                let mut ou_rng = rng::stream(master, "ou", &[agent_idx as u64, episode]);
                let noise = ou[agent_idx].sample(&mut ou_rng);
                for (x, n) in sample.pre_squash.iter_mut().zip(noise.iter()) {
                    *x += anneal * n;
                }
                sample.bid_action =
                    crate::learn::squash_action(&sample.pre_squash, &agent.policy.action_box)?;
                let mean = agent.policy.actor.infer(&obs.features)?;
                sample.log_prob =
                    agent.policy.log_prob_of_pre_squash(&mean, &sample.pre_squash);
            }
            if gate[agent_idx] {
                let action: [f64; ACTION_DIM] =
                    sample.bid_action.clone().try_into().map_err(|_| {
                        Error::Dimension("policy action is not 5-dimensional".into())
                    })?;
                bids[agent_idx] = Some(Bid::from_action(agent_idx, kind, &action, &bid_box));
            }
            samples.push(sample);
        }

        let out = self.env.step(&bids)?;
        for (agent_idx, sample) in samples.into_iter().enumerate() {
            self.buffer.push(
                agent_idx,
                obs_features[agent_idx].clone(),
                global.clone(),
                sample.pre_squash,
                sample.log_prob,
                out.records[agent_idx].reward,
                values[agent_idx],
                false,
            );
        }
        self.episode += 1;

        let update = if self.buffer.is_full() {
            let (_, _, bootstrap) = self.values_for_current_state()?;
            self.buffer.set_bootstrap(bootstrap);
            let mut update_rng = rng::stream(master, "update", &[self.update_count]);
            let stats = mappo_update(
                &mut self.agents,
                &mut self.critic,
                &mut self.buffer,
                &self.config.algorithm,
                &mut update_rng,
            )?;
            self.update_count += 1;
            Some(stats)
        } else {
            None
        };

        let rows = out
            .records
            .iter()
            .map(|r| EpisodeMetrics::from_record(episode, r))
            .collect();
        Ok(EpisodeStepOutput { metrics: rows, log: out.log, update })
    }

    /// Deterministic-policy evaluation on a fresh environment stream.
    ///
    /// Windowed stress regimes are training-side phenomena; evaluation
    /// environments drop them (whole-run regimes are kept).
    pub fn evaluate(&self, eval_index: u64) -> Result<EvaluationSnapshot> {
        let mut cfg = self.config.clone();
        if cfg.stress.kind != StressKind::None
            && (cfg.stress.window_start.is_some() || cfg.stress.window_end.is_some())
        {
            cfg.stress.kind = StressKind::None;
        }
        let key = rng::derive_key(self.config.run.seed, "eval", &[eval_index]);
        let episodes = self.config.run.eval_episodes;
        let mut env = MarketEnv::new(&cfg, key, episodes)?;
        let n = self.agents.len();
        let mut reward_sums = vec![0.0; n];
        let mut profit_sum = 0.0;
        for episode in 0..episodes {
            let kind = env.current_treaty().treaty_kind;
            let mut bids: Vec<Option<Bid>> = vec![None; n];
            let gate = env.participation();
            for (agent_idx, agent) in self.agents.iter().enumerate() {
                if !gate[agent_idx] {
                    continue;
                }
                let obs = env.observe(agent_idx)?;
                let mut act_rng = rng::stream(key, "eval-policy", &[agent_idx as u64, episode]);
                let sample = agent.policy.act(&obs, &mut act_rng, ActMode::Deterministic)?;
                let action: [f64; ACTION_DIM] =
                    sample.bid_action.try_into().map_err(|_| {
                        Error::Dimension("policy action is not 5-dimensional".into())
                    })?;
                bids[agent_idx] = Some(Bid::from_action(agent_idx, kind, &action, env.bid_box()));
            }
            let out = env.step(&bids)?;
            for r in &out.records {
                reward_sums[r.agent_id] += r.reward;
                profit_sum += r.profit;
            }
        }
        let per_agent_mean_reward: Vec<f64> =
            reward_sums.iter().map(|s| s / episodes.max(1) as f64).collect();
        Ok(EvaluationSnapshot {
            at_episode: self.episode,
            eval_episodes: episodes,
            mean_reward: per_agent_mean_reward.iter().sum::<f64>() / n as f64,
            mean_profit: profit_sum / (episodes.max(1) * n as u64) as f64,
            per_agent_mean_reward,
        })
    }

    /// Full training state as a checkpoint container.
    pub fn snapshot(&self) -> Result<Checkpoint> {
        let mut ckpt = Checkpoint::new();
        ckpt.tag("algorithm", "mappo");
        ckpt.tag("version", env!("CARGO_PKG_VERSION"));
        ckpt.tag(
            "critic_mode",
            match self.config.algorithm.critic_mode {
                CriticMode::Central => "central",
                CriticMode::Local => "local",
            },
        );
        ckpt.tag("n_agents", self.agents.len().to_string());
        let config_json = serde_json::to_vec(&self.config)
            .map_err(|e| Error::Checkpoint(format!("config serialization: {e}")))?;
        ckpt.put_bytes("config", config_json);
        let env_json = serde_json::to_vec(&self.env.snapshot())
            .map_err(|e| Error::Checkpoint(format!("env serialization: {e}")))?;
        ckpt.put_bytes("env", env_json);
        let buffer_json = serde_json::to_vec(&self.buffer)
            .map_err(|e| Error::Checkpoint(format!("buffer serialization: {e}")))?;
        ckpt.put_bytes("buffer", buffer_json);
        ckpt.put_u64("counters", vec![self.episode, self.update_count]);
        // Streams are re-derived from (master seed, counters); the master
        // seed is the entire rng state.
        ckpt.put_u64("rng", vec![self.config.run.seed]);

        for (i, agent) in self.agents.iter().enumerate() {
            ckpt.put_network(&format!("agent-{i}/actor"), &agent.policy.actor, None);
            ckpt.put_f64(&format!("agent-{i}/log_std"), agent.policy.log_std.clone());
            let opt = serde_json::to_vec(&agent.adam)
                .map_err(|e| Error::Checkpoint(format!("optimizer serialization: {e}")))?;
            ckpt.put_bytes(&format!("agent-{i}/opt"), opt);
        }
        match &self.critic {
            CriticStack::Central { critic, adam } => {
                ckpt.put_network("critic", &critic.net, Some(adam));
            }
            CriticStack::Local { critics, adams } => {
                for (i, (net, adam)) in critics.iter().zip(adams.iter()).enumerate() {
                    ckpt.put_network(&format!("critic-{i}"), net, Some(adam));
                }
            }
        }
        if let Some(ou) = &self.ou {
            for (i, p) in ou.iter().enumerate() {
                ckpt.put_f64(&format!("agent-{i}/ou"), p.state().to_vec());
            }
        }
        Ok(ckpt)
    }

    /// Rebuild a trainer from a checkpoint; training resumes bit-exactly.
    pub fn restore(ckpt: &Checkpoint) -> Result<Self> {
        let config: RunConfig = serde_json::from_slice(ckpt.get_bytes("config")?)
            .map_err(|e| Error::Checkpoint(format!("config parse: {e}")))?;
        let mut trainer = Trainer::new(&config)?;

        let env_snap: crate::market::env::EnvSnapshot =
            serde_json::from_slice(ckpt.get_bytes("env")?)
                .map_err(|e| Error::Checkpoint(format!("env parse: {e}")))?;
        trainer.env = MarketEnv::restore(
            &config,
            rng::derive_key(config.run.seed, "train-env", &[]),
            config.run.episodes,
            env_snap,
        )?;
        trainer.buffer = serde_json::from_slice(ckpt.get_bytes("buffer")?)
            .map_err(|e| Error::Checkpoint(format!("buffer parse: {e}")))?;
        let counters = ckpt.get_u64("counters")?;
        if counters.len() != 2 {
            return Err(Error::Checkpoint("counters section malformed".into()));
        }
        trainer.episode = counters[0];
        trainer.update_count = counters[1];

        for (i, agent) in trainer.agents.iter_mut().enumerate() {
            let snap = ckpt.get_network(&format!("agent-{i}/actor"))?;
            let (net, _) = snap.restore()?;
            agent.policy.actor = net;
            agent.policy.log_std = ckpt.get_f64(&format!("agent-{i}/log_std"))?.to_vec();
            agent.adam = serde_json::from_slice(ckpt.get_bytes(&format!("agent-{i}/opt"))?)
                .map_err(|e| Error::Checkpoint(format!("optimizer parse: {e}")))?;
        }
        match &mut trainer.critic {
            CriticStack::Central { critic, adam } => {
                let snap = ckpt.get_network("critic")?;
                let (net, a) = snap.restore()?;
                critic.net = net;
                *adam = a.ok_or_else(|| {
                    Error::Checkpoint("critic snapshot is missing optimizer state".into())
                })?;
            }
            CriticStack::Local { critics, adams } => {
                for (i, (net_slot, adam_slot)) in
                    critics.iter_mut().zip(adams.iter_mut()).enumerate()
                {
                    let snap = ckpt.get_network(&format!("critic-{i}"))?;
                    let (net, a) = snap.restore()?;
                    *net_slot = net;
                    *adam_slot = a.ok_or_else(|| {
                        Error::Checkpoint(format!("critic-{i} snapshot missing optimizer"))
                    })?;
                }
            }
        }
        if let Some(ou) = &mut trainer.ou {
            for (i, p) in ou.iter_mut().enumerate() {
                let state = ckpt.get_f64(&format!("agent-{i}/ou"))?.to_vec();
                *p = p.clone().with_state(state)?;
            }
        }
        Ok(trainer)
    }
}

/// In-memory training output; file-writing lives in [`run_training`].
#[derive(Debug)]
pub struct TrainOutput {
    pub metrics: Vec<EpisodeMetrics>,
    pub logs: Vec<EpisodeLogRecord>,
    pub evaluations: Vec<EvaluationSnapshot>,
    pub agents: Vec<MappoAgent>,
    pub critic: CriticStack,
    pub updates: u64,
}

/// Train without touching the filesystem.
pub fn train(config: &RunConfig) -> Result<TrainOutput> {
    let mut trainer = Trainer::new(config)?;
    let episodes = config.run.episodes;
    let interval = config.run.evaluation_interval;
    let mut metrics = Vec::with_capacity((episodes as usize) * config.run.n_agents);
    let mut logs = Vec::with_capacity(episodes as usize);
    let mut evaluations = Vec::new();
    for e in 0..episodes {
        let step = trainer.step_episode()?;
        metrics.extend(step.metrics);
        logs.push(step.log);
        let done = e + 1 == episodes;
        if (e + 1) % interval == 0 || done {
            let eval_index = (e + 1).div_ceil(interval);
            let snap = trainer.evaluate(eval_index)?;
            if evaluations.last().map(|s: &EvaluationSnapshot| s.at_episode) != Some(snap.at_episode)
            {
                evaluations.push(snap);
            }
        }
    }
    Ok(TrainOutput {
        metrics,
        logs,
        evaluations,
        updates: trainer.update_count,
        agents: trainer.agents,
        critic: trainer.critic,
    })
}

/// File layout produced by a training run.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub dir: PathBuf,
    pub metrics: PathBuf,
    pub episodes: PathBuf,
    pub evaluations: PathBuf,
    pub checkpoint: PathBuf,
    pub manifest: PathBuf,
}

impl RunPaths {
    pub fn under(dir: &Path) -> RunPaths {
        RunPaths {
            dir: dir.to_path_buf(),
            metrics: dir.join("metrics.csv"),
            episodes: dir.join("episodes.jsonl"),
            evaluations: dir.join("evaluations.csv"),
            checkpoint: dir.join("checkpoint.tmck"),
            manifest: dir.join("manifest.json"),
        }
    }
}

/// Run the full training loop and write the metrics stream, episode log,
/// evaluation snapshots, final checkpoint, and manifest under the configured
/// output directory. Streams are flushed per episode so partial outputs
/// survive failures.
pub fn run_training(config: &RunConfig) -> Result<(RunManifest, TrainOutput)> {
    let started = unix_now();
    let paths = RunPaths::under(Path::new(&config.output.dir));
    std::fs::create_dir_all(&paths.dir)
        .map_err(|e| Error::io(paths.dir.display().to_string(), e))?;
    let io_err = |p: &Path| {
        let p = p.display().to_string();
        move |e: std::io::Error| Error::io(p.clone(), e)
    };

    let mut metrics_file = std::io::BufWriter::new(
        std::fs::File::create(&paths.metrics).map_err(io_err(&paths.metrics))?,
    );
    writeln!(metrics_file, "{}", metrics::METRICS_HEADER).map_err(io_err(&paths.metrics))?;
    let mut episodes_file = std::io::BufWriter::new(
        std::fs::File::create(&paths.episodes).map_err(io_err(&paths.episodes))?,
    );

    let mut trainer = Trainer::new(config)?;
    let episodes = config.run.episodes;
    let interval = config.run.evaluation_interval;
    let mut metrics_rows = Vec::new();
    let mut logs = Vec::new();
    let mut evaluations: Vec<EvaluationSnapshot> = Vec::new();

    for e in 0..episodes {
        let step = trainer.step_episode()?;
        for row in &step.metrics {
            writeln!(metrics_file, "{}", metrics::format_row(row))
                .map_err(io_err(&paths.metrics))?;
        }
        let log_line = serde_json::to_string(&step.log)
            .map_err(|e| Error::Contract(format!("episode log serialization: {e}")))?;
        writeln!(episodes_file, "{log_line}").map_err(io_err(&paths.episodes))?;
        metrics_rows.extend(step.metrics);
        logs.push(step.log);

        let done = e + 1 == episodes;
        if (e + 1) % interval == 0 || done {
            let eval_index = (e + 1).div_ceil(interval);
            let snap = trainer.evaluate(eval_index)?;
            if evaluations.last().map(|s| s.at_episode) != Some(snap.at_episode) {
                evaluations.push(snap);
            }
        }
    }
    metrics_file.flush().map_err(io_err(&paths.metrics))?;
    episodes_file.flush().map_err(io_err(&paths.episodes))?;

    let mut eval_text = String::from("at_episode,mean_reward,mean_profit\n");
    for s in &evaluations {
        eval_text.push_str(&format!(
            "{},{},{}\n",
            s.at_episode,
            metrics::fmt_f64(s.mean_reward),
            metrics::fmt_f64(s.mean_profit)
        ));
    }
    std::fs::write(&paths.evaluations, eval_text).map_err(io_err(&paths.evaluations))?;

    trainer.snapshot()?.write_to(&paths.checkpoint)?;

    let training_mean_reward = if metrics_rows.is_empty() {
        0.0
    } else {
        metrics_rows.iter().map(|m| m.reward).sum::<f64>() / metrics_rows.len() as f64
    };
    let summary = RunSummary {
        episodes,
        updates: trainer.update_count,
        final_eval_mean_reward: evaluations.last().map(|s| s.mean_reward).unwrap_or(0.0),
        final_eval_mean_profit: evaluations.last().map(|s| s.mean_profit).unwrap_or(0.0),
        training_mean_reward,
    };
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        started_at_unix: started,
        finished_at_unix: unix_now(),
        outputs: vec![
            paths.metrics.clone(),
            paths.episodes.clone(),
            paths.evaluations.clone(),
            paths.checkpoint.clone(),
        ],
        summary,
    };
    manifest.write_to(&paths.manifest)?;

    let output = TrainOutput {
        metrics: metrics_rows,
        logs,
        evaluations,
        updates: trainer.update_count,
        agents: trainer.agents,
        critic: trainer.critic,
    };
    Ok((manifest, output))
}

/// Train the independent single-agent Q-learning baselines by self-play.
pub fn train_q_baseline(config: &RunConfig) -> Result<Vec<QBaselineState>> {
    config.validate()?;
    let alg = &config.algorithm;
    let master = config.run.seed;
    let key = rng::derive_key(master, "q-train-env", &[]);
    let mut env = MarketEnv::new(config, key, config.run.episodes)?;
    let obs_dim = env.observation_dim();
    let grid = QGrid { levels: alg.q_grid_levels, dims: 3 };
    let mut init_rng = rng::stream(master, "q-init", &[]);
    let mut learners: Vec<QBaselineState> = (0..config.run.n_agents)
        .map(|_| {
            QBaselineState::new(
                obs_dim,
                grid,
                &alg.q_hidden,
                alg.q_lr,
                alg.q_tau,
                alg.q_replay_capacity,
                alg.q_epsilon_start,
                alg.q_epsilon_end,
                alg.q_epsilon_decay_episodes,
                &mut init_rng,
            )
        })
        .collect::<Result<_>>()?;

    for episode in 0..config.run.episodes {
        let kind = env.current_treaty().treaty_kind;
        let gate = env.participation();
        let obs_all: Vec<Vec<f64>> =
            env.observe_all()?.into_iter().map(|o| o.features).collect();
        let mut bids: Vec<Option<Bid>> = vec![None; learners.len()];
        let mut chosen = vec![0usize; learners.len()];
        for (i, learner) in learners.iter().enumerate() {
            let mut act_rng = rng::stream(master, "q-policy", &[i as u64, episode]);
            let idx = learner.act(&obs_all[i], episode, &mut act_rng)?;
            chosen[i] = idx;
            if gate[i] {
                let action = grid_bid_action(&grid, idx, kind, env.bid_box());
                bids[i] = Some(Bid::from_action(i, kind, &action, env.bid_box()));
            }
        }
        let out = env.step(&bids)?;
        for (i, learner) in learners.iter_mut().enumerate() {
            let next_obs = env.observe(i)?.features;
            learner.push(QTransition {
                obs: obs_all[i].clone(),
                action_idx: chosen[i],
                reward: out.records[i].reward,
                next_obs,
                done: false,
            });
            if learner.replay_len() >= alg.q_warmup
                && episode % alg.q_update_every.max(1) == 0
            {
                let mut up_rng = rng::stream(master, "q-update", &[i as u64, episode]);
                learner.update(alg.q_batch_size, alg.gamma, &mut up_rng)?;
            }
        }
    }
    Ok(learners)
}
