//! Single-agent deep Q-learning baseline over a discretized action grid.
//!
//! The learner treats the bidding environment as stationary: a Q network
//! over (observation ⊕ grid coordinates) trained on uniformly sampled replay
//! against a soft-updated target network, ε-greedy over the enumerated grid.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::learn::{AdamState, DenseNet, Gradients};
use crate::market::bid::{BidBox, ACTION_DIM, A_ATTACHMENT_OFFSET, A_COMMISSION, A_LIMIT_FACTOR, A_QUOTA, A_RATE};
use crate::market::treaty::TreatyKind;

/// Discrete action grid: `levels` points per dimension over `dims`
/// dimensions, addressed by a flat index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QGrid {
    pub levels: usize,
    pub dims: usize,
}

impl QGrid {
    pub fn n_actions(&self) -> usize {
        self.levels.pow(self.dims as u32)
    }

    /// Normalized coordinates in [0, 1] per dimension for a flat index.
    pub fn coords(&self, mut idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dims];
        for d in 0..self.dims {
            let level = idx % self.levels;
            idx /= self.levels;
            out[d] = if self.levels > 1 {
                level as f64 / (self.levels - 1) as f64
            } else {
                0.5
            };
        }
        out
    }
}

/// Map a grid action onto the continuous bid box: dimension 0 is the premium
/// rate; dimensions 1–2 cover (attachment offset, limit factor) for
/// excess-of-loss and (quota, commission) for quota share.
pub fn grid_bid_action(
    grid: &QGrid,
    idx: usize,
    kind: TreatyKind,
    bounds: &BidBox,
) -> [f64; ACTION_DIM] {
    let c = grid.coords(idx);
    let lerp = |(lo, hi): (f64, f64), t: f64| lo + (hi - lo) * t;
    let mut action = [0.0; ACTION_DIM];
    action[A_RATE] = lerp(bounds.rate, c[0]);
    match kind {
        TreatyKind::ExcessOfLoss => {
            action[A_ATTACHMENT_OFFSET] = lerp(bounds.attachment_offset, c[1]);
            action[A_LIMIT_FACTOR] = lerp(bounds.limit_factor, c[2]);
        }
        TreatyKind::QuotaShare => {
            action[A_QUOTA] = lerp(bounds.quota, c[1]);
            action[A_COMMISSION] = lerp(bounds.commission, c[2]);
        }
    }
    action
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTransition {
    pub obs: Vec<f64>,
    pub action_idx: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct QBaselineState {
    pub q_net: DenseNet,
    pub target_q_net: DenseNet,
    pub adam: AdamState,
    pub grid: QGrid,
    pub tau_soft: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_episodes: u64,
    replay: VecDeque<QTransition>,
    replay_capacity: usize,
}

impl QBaselineState {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        obs_dim: usize,
        grid: QGrid,
        hidden: &[usize],
        lr: f64,
        tau_soft: f64,
        replay_capacity: usize,
        epsilon_start: f64,
        epsilon_end: f64,
        epsilon_decay_episodes: u64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut sizes = vec![obs_dim + grid.dims];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let q_net = DenseNet::init(&sizes, rng)?;
        let target_q_net = q_net.clone();
        let adam = AdamState::new(q_net.param_count(), lr);
        Ok(QBaselineState {
            q_net,
            target_q_net,
            adam,
            grid,
            tau_soft,
            epsilon_start,
            epsilon_end,
            epsilon_decay_episodes,
            replay: VecDeque::new(),
            replay_capacity: replay_capacity.max(1),
        })
    }

    pub fn epsilon(&self, episode: u64) -> f64 {
        if self.epsilon_decay_episodes == 0 {
            return self.epsilon_end;
        }
        let frac = (episode as f64 / self.epsilon_decay_episodes as f64).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    fn q_input(&self, obs: &[f64], action_idx: usize) -> Vec<f64> {
        let mut input = Vec::with_capacity(obs.len() + self.grid.dims);
        input.extend_from_slice(obs);
        input.extend_from_slice(&self.grid.coords(action_idx));
        input
    }

    pub fn q_value(&self, net_is_target: bool, obs: &[f64], action_idx: usize) -> Result<f64> {
        let net = if net_is_target { &self.target_q_net } else { &self.q_net };
        Ok(net.infer(&self.q_input(obs, action_idx))?[0])
    }

    /// Greedy argmax over the enumerated grid, ties to the lowest index.
    pub fn greedy_action(&self, obs: &[f64]) -> Result<usize> {
        let mut best = (0usize, f64::NEG_INFINITY);
        for idx in 0..self.grid.n_actions() {
            let q = self.q_value(false, obs, idx)?;
            if q > best.1 {
                best = (idx, q);
            }
        }
        Ok(best.0)
    }

    /// ε-greedy over the grid.
    pub fn act(&self, obs: &[f64], episode: u64, rng: &mut impl Rng) -> Result<usize> {
        let eps = self.epsilon(episode);
        if rng.random::<f64>() < eps {
            Ok(rng.random_range(0..self.grid.n_actions()))
        } else {
            self.greedy_action(obs)
        }
    }

    pub fn push(&mut self, transition: QTransition) {
        if self.replay.len() == self.replay_capacity {
            self.replay.pop_front();
        }
        self.replay.push_back(transition);
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    /// One gradient step on the squared Bellman residual against the target
    /// network, then a soft target update. Returns `None` (skip) when the
    /// replay holds fewer than `batch_size` transitions.
    pub fn update(
        &mut self,
        batch_size: usize,
        gamma: f64,
        rng: &mut impl Rng,
    ) -> Result<Option<f64>> {
        if self.replay.len() < batch_size {
            return Ok(None);
        }
        let mut grads = Gradients::zeros_like(&self.q_net);
        let mut loss = 0.0;
        for _ in 0..batch_size {
            let t = &self.replay[rng.random_range(0..self.replay.len())];
            let target = if t.done || gamma == 0.0 {
                t.reward
            } else {
                let mut best = f64::NEG_INFINITY;
                for idx in 0..self.grid.n_actions() {
                    best = best.max(self.q_value(true, &t.next_obs, idx)?);
                }
                t.reward + gamma * best
            };
            let (out, cache) = self.q_net.forward(&self.q_input(&t.obs, t.action_idx))?;
            let err = out[0] - target;
            loss += 0.5 * err * err;
            let sample = self.q_net.backward(&cache, &[err])?;
            grads.add_scaled(&sample, 1.0);
        }
        let batch = batch_size as f64;
        loss /= batch;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("q-baseline loss {loss}")));
        }
        let mut flat = grads.flatten();
        flat.iter_mut().for_each(|g| *g /= batch);
        let mut params = self.q_net.flat_params();
        self.adam.step(&mut params, &flat)?;
        self.q_net.set_flat_params(&params)?;
        self.soft_update_target();
        Ok(Some(loss))
    }

    /// target ← (1 − τ)·target + τ·online.
    pub fn soft_update_target(&mut self) {
        let online = self.q_net.flat_params();
        let mut target = self.target_q_net.flat_params();
        for (t, o) in target.iter_mut().zip(online.iter()) {
            *t = (1.0 - self.tau_soft) * *t + self.tau_soft * o;
        }
        self.target_q_net
            .set_flat_params(&target)
            .expect("target net shares the online architecture");
    }
}
