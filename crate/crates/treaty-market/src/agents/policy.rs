//! Squashed-Gaussian bidding policy: a dense actor maps the observation to
//! pre-squash action means; a learnable per-dimension log-std drives
//! exploration; tanh squashing keeps sampled actions inside the admissible
//! bid box.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::learn::{squash_action, squash_log_jacobian, ActionBox, DenseNet, ForwardCache};
use crate::market::Observation;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 1.0;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Stochastic,
    Deterministic,
}

/// One sampled (or deterministic) action. The pre-squash point is retained
/// so later updates can recompute the exact log-probability under new
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSample {
    pub bid_action: Vec<f64>,
    pub pre_squash: Vec<f64>,
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub actor: DenseNet,
    pub log_std: Vec<f64>,
    pub action_box: ActionBox,
}

impl GaussianPolicy {
    pub fn new(
        obs_dim: usize,
        hidden: &[usize],
        action_box: ActionBox,
        log_std_init: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut layer_sizes = Vec::with_capacity(hidden.len() + 2);
        layer_sizes.push(obs_dim);
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(action_box.dim());
        let actor = DenseNet::init(&layer_sizes, rng)?;
        let log_std = vec![log_std_init.clamp(LOG_STD_MIN, LOG_STD_MAX); action_box.dim()];
        Ok(GaussianPolicy { actor, log_std, action_box })
    }

    pub fn action_dim(&self) -> usize {
        self.action_box.dim()
    }

    pub fn clamp_log_std(&mut self) {
        for s in self.log_std.iter_mut() {
            *s = s.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    /// Decentralized execution: only policy parameters, the observation, and
    /// the caller's rng enter here.
    pub fn act(&self, obs: &Observation, rng: &mut impl Rng, mode: ActMode) -> Result<ActionSample> {
        if obs.dim() != self.actor.input_dim() {
            return Err(Error::Dimension(format!(
                "observation dim {} does not match actor input {}",
                obs.dim(),
                self.actor.input_dim()
            )));
        }
        let mean = self.actor.infer(&obs.features)?;
        let pre_squash: Vec<f64> = match mode {
            ActMode::Deterministic => mean.clone(),
            ActMode::Stochastic => mean
                .iter()
                .zip(self.log_std.iter())
                .map(|(m, ls)| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + ls.exp() * z
                })
                .collect(),
        };
        let bid_action = squash_action(&pre_squash, &self.action_box)?;
        let log_prob = self.log_prob_of_pre_squash(&mean, &pre_squash);
        Ok(ActionSample { bid_action, pre_squash, log_prob })
    }

    /// log π(a) for the squashed action with pre-squash point `x`:
    /// Gaussian log-density at `x` minus the squash log-Jacobian.
    pub fn log_prob_of_pre_squash(&self, mean: &[f64], x: &[f64]) -> f64 {
        let gauss: f64 = mean
            .iter()
            .zip(self.log_std.iter())
            .zip(x.iter())
            .map(|((m, ls), xi)| {
                let sigma = ls.exp();
                -0.5 * LN_2PI - ls - (xi - m).powi(2) / (2.0 * sigma * sigma)
            })
            .sum();
        gauss - squash_log_jacobian(x, &self.action_box)
    }

    /// Recompute log π(a) under the current parameters, returning the
    /// forward cache and mean for gradient construction.
    pub fn evaluate(&self, obs_features: &[f64], x: &[f64]) -> Result<(f64, Vec<f64>, ForwardCache)> {
        let (mean, cache) = self.actor.forward(obs_features)?;
        let lp = self.log_prob_of_pre_squash(&mean, x);
        Ok((lp, mean, cache))
    }

    /// Entropy of the pre-squash diagonal Gaussian.
    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + 0.5 * (LN_2PI + 1.0)).sum()
    }

    /// Flat parameter block: actor parameters followed by log-std entries.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut p = self.actor.flat_params();
        p.extend_from_slice(&self.log_std);
        p
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let n_actor = self.actor.param_count();
        if flat.len() != n_actor + self.log_std.len() {
            return Err(Error::Dimension("policy flat parameter length mismatch".into()));
        }
        self.actor.set_flat_params(&flat[..n_actor])?;
        self.log_std.copy_from_slice(&flat[n_actor..]);
        self.clamp_log_std();
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.actor.param_count() + self.log_std.len()
    }
}
