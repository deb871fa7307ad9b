//! The MAPPO update: per-agent clipped-surrogate policy steps with entropy
//! bonus, plus a squared-error value update for the critic stack. Strictly
//! on-policy; the rollout buffer is cleared after every update.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::agents::buffer::RolloutBuffer;
use crate::agents::critic::CriticStack;
use crate::agents::policy::GaussianPolicy;
use crate::config::AlgorithmConfig;
use crate::error::{Error, Result};
use crate::learn::{AdamState, Gradients};

/// One learner: an actor policy and the Adam state over its flat parameter
/// block (actor weights followed by log-std entries).
#[derive(Debug, Clone)]
pub struct MappoAgent {
    pub policy: GaussianPolicy,
    pub adam: AdamState,
}

impl MappoAgent {
    pub fn new(policy: GaussianPolicy, lr: f64) -> Self {
        let adam = AdamState::new(policy.param_count(), lr);
        MappoAgent { policy, adam }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub actor_objective: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// Per-sample clipped surrogate: min(r·A, clip(r, 1−ε, 1+ε)·A), and the
/// factor dL/d(log π) (zero whenever the clipped branch is strictly active).
pub(crate) fn clipped_objective(ratio: f64, advantage: f64, clip_eps: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * advantage;
    if unclipped <= clipped {
        (unclipped, ratio * advantage)
    } else {
        (clipped, 0.0)
    }
}

fn global_grad_norm(flat: &[f64]) -> f64 {
    flat.iter().map(|g| g * g).sum::<f64>().sqrt()
}

fn clip_grad(flat: &mut [f64], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = global_grad_norm(flat);
    if norm > max_norm {
        let scale = max_norm / norm;
        flat.iter_mut().for_each(|g| *g *= scale);
    }
}

/// One MAPPO update over a full rollout buffer.
///
/// For each agent the clipped surrogate (plus entropy bonus) is maximized
/// for `update_epochs` passes over shuffled minibatches; the critic minimizes
/// squared error against GAE returns. Any non-finite loss aborts the update
/// with diagnostics. The buffer is cleared on success.
pub fn mappo_update(
    agents: &mut [MappoAgent],
    critic: &mut CriticStack,
    buffer: &mut RolloutBuffer,
    cfg: &AlgorithmConfig,
    rng: &mut impl Rng,
) -> Result<UpdateStats> {
    let gae = buffer.compute_advantages(cfg.gamma, cfg.gae_lambda)?;
    let n_steps = buffer.len();
    let minibatch = cfg.minibatch_size.clamp(1, n_steps);

    let mut stats = UpdateStats::default();
    let mut objective_terms = 0usize;
    let mut clip_hits = 0usize;

    // ----- actor updates (independent per agent) -----
    for (agent_idx, agent) in agents.iter_mut().enumerate() {
        let seg = &buffer.agents[agent_idx];
        let adv = &gae[agent_idx].advantages;
        let mut order: Vec<usize> = (0..n_steps).collect();
        for _epoch in 0..cfg.update_epochs.max(1) {
            order.shuffle(rng);
            for chunk in order.chunks(minibatch) {
                let mut grad_net = Gradients::zeros_like(&agent.policy.actor);
                let mut grad_log_std = vec![0.0; agent.policy.log_std.len()];
                let mut batch_objective = 0.0;
                for &t in chunk {
                    let x = &seg.pre_squash[t];
                    let (lp_new, mean, cache) =
                        agent.policy.evaluate(&seg.observations[t], x)?;
                    let ratio = (lp_new - seg.log_probs[t]).exp();
                    let (objective, grad_lp) =
                        clipped_objective(ratio, adv[t], cfg.clip_epsilon);
                    if !objective.is_finite() {
                        return Err(Error::NonFinite(format!(
                            "actor objective for agent {agent_idx} at step {t}: ratio {ratio}, advantage {}",
                            adv[t]
                        )));
                    }
                    batch_objective += objective;
                    if (ratio - 1.0).abs() > cfg.clip_epsilon {
                        clip_hits += 1;
                    }
                    objective_terms += 1;

                    // d logπ / d mean_i = (x_i − μ_i)/σ_i²;
                    // d logπ / d log_std_i = ((x_i − μ_i)²/σ_i² − 1).
                    let mut d_mean = vec![0.0; mean.len()];
                    for i in 0..mean.len() {
                        let sigma = agent.policy.log_std[i].exp();
                        let centered = x[i] - mean[i];
                        d_mean[i] = grad_lp * centered / (sigma * sigma);
                        grad_log_std[i] += grad_lp * (centered * centered / (sigma * sigma) - 1.0)
                            + cfg.entropy_weight;
                    }
                    let sample_grads = agent.policy.actor.backward(&cache, &d_mean)?;
                    grad_net.add_scaled(&sample_grads, 1.0);
                }
                let batch_len = chunk.len() as f64;
                stats.actor_objective += batch_objective / batch_len;

                // Ascent on the objective: negate for the minimizing step.
                let mut flat = grad_net.flatten();
                flat.extend_from_slice(&grad_log_std);
                for g in flat.iter_mut() {
                    *g = -*g / batch_len;
                    if !g.is_finite() {
                        return Err(Error::NonFinite(format!(
                            "actor gradient for agent {agent_idx} became non-finite"
                        )));
                    }
                }
                clip_grad(&mut flat, cfg.grad_norm_clip);
                let mut params = agent.policy.flat_params();
                agent.adam.step(&mut params, &flat)?;
                agent.policy.set_flat_params(&params)?;
            }
        }
        stats.entropy += agent.policy.entropy();
    }

    // ----- critic update -----
    match critic {
        CriticStack::Central { critic, adam } => {
            let mut samples: Vec<(usize, usize)> = Vec::with_capacity(agents.len() * n_steps);
            for a in 0..agents.len() {
                for t in 0..n_steps {
                    samples.push((a, t));
                }
            }
            for _epoch in 0..cfg.update_epochs.max(1) {
                samples.shuffle(rng);
                for chunk in samples.chunks(minibatch) {
                    let mut grads = Gradients::zeros_like(&critic.net);
                    let mut batch_loss = 0.0;
                    for &(a, t) in chunk {
                        let input =
                            critic.input(&buffer.agents[a].global_states[t], a)?;
                        let (out, cache) = critic.net.forward(&input)?;
                        let err = out[0] - gae[a].returns[t];
                        batch_loss += 0.5 * err * err;
                        let sample = critic.net.backward(&cache, &[err])?;
                        grads.add_scaled(&sample, 1.0);
                    }
                    let batch_len = chunk.len() as f64;
                    if !batch_loss.is_finite() {
                        return Err(Error::NonFinite(format!(
                            "central critic loss became non-finite ({batch_loss})"
                        )));
                    }
                    stats.critic_loss += batch_loss / batch_len;
                    let mut flat = grads.flatten();
                    flat.iter_mut().for_each(|g| *g /= batch_len);
                    clip_grad(&mut flat, cfg.grad_norm_clip);
                    let mut params = critic.net.flat_params();
                    adam.step(&mut params, &flat)?;
                    critic.net.set_flat_params(&params)?;
                }
            }
        }
        CriticStack::Local { critics, adams } => {
            for a in 0..agents.len() {
                let seg = &buffer.agents[a];
                let mut order: Vec<usize> = (0..n_steps).collect();
                for _epoch in 0..cfg.update_epochs.max(1) {
                    order.shuffle(rng);
                    for chunk in order.chunks(minibatch) {
                        let mut grads = Gradients::zeros_like(&critics[a]);
                        let mut batch_loss = 0.0;
                        for &t in chunk {
                            let (out, cache) = critics[a].forward(&seg.observations[t])?;
                            let err = out[0] - gae[a].returns[t];
                            batch_loss += 0.5 * err * err;
                            let sample = critics[a].backward(&cache, &[err])?;
                            grads.add_scaled(&sample, 1.0);
                        }
                        let batch_len = chunk.len() as f64;
                        if !batch_loss.is_finite() {
                            return Err(Error::NonFinite(format!(
                                "local critic {a} loss became non-finite"
                            )));
                        }
                        stats.critic_loss += batch_loss / batch_len;
                        let mut flat = grads.flatten();
                        flat.iter_mut().for_each(|g| *g /= batch_len);
                        clip_grad(&mut flat, cfg.grad_norm_clip);
                        let mut params = critics[a].flat_params();
                        adams[a].step(&mut params, &flat)?;
                        critics[a].set_flat_params(&params)?;
                    }
                }
            }
        }
    }

    stats.entropy /= agents.len() as f64;
    if objective_terms > 0 {
        stats.clip_fraction = clip_hits as f64 / objective_terms as f64;
    }
    buffer.clear();
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::policy::ActMode;
    use crate::learn::ActionBox;
    use crate::market::Observation;
    use proptest::prelude::*;

    #[test]
    fn ratio_one_gives_advantage_and_unclipped_gradient() {
        for adv in [-2.0, -0.3, 0.0, 0.7, 3.0] {
            let (obj, grad) = clipped_objective(1.0, adv, 0.2);
            assert_eq!(obj, adv);
            assert_eq!(grad, adv, "at ratio 1 the clip is inactive");
        }
    }

    proptest! {
        /// Clipped ≤ unclipped for positive advantage beyond the band;
        /// equality inside the band.
        #[test]
        fn clip_bound_property(ratio in 0.0..3.0f64, adv in -2.0..2.0f64) {
            let eps = 0.2;
            let (obj, _) = clipped_objective(ratio, adv, eps);
            let unclipped = ratio * adv;
            prop_assert!(obj <= unclipped + 1e-12);
            if adv > 0.0 && ratio > 1.0 + eps {
                prop_assert!(obj < unclipped);
                prop_assert!((obj - (1.0 + eps) * adv).abs() < 1e-12);
            }
            if (ratio - 1.0).abs() <= eps {
                prop_assert!((obj - unclipped).abs() < 1e-12);
            }
        }
    }

    fn bandit_setup(lr: f64, entropy_weight: f64) -> (Vec<MappoAgent>, CriticStack, AlgorithmConfig) {
        let mut rng = crate::rng::stream(71, "bandit", &[]);
        let action_box = ActionBox::new(vec![0.0], vec![1.0]).unwrap();
        let policy = GaussianPolicy::new(1, &[16], action_box, -0.7, &mut rng).unwrap();
        let agents = vec![MappoAgent::new(policy, lr)];
        let critic = CriticStack::new_central(1, 1, &[16], 1e-2, &mut rng).unwrap();
        let cfg = AlgorithmConfig {
            actor_hidden: vec![16],
            critic_hidden: vec![16],
            minibatch_size: 64,
            entropy_weight,
            ..AlgorithmConfig::default()
        };
        (agents, critic, cfg)
    }

    #[test]
    fn zero_advantages_with_zero_entropy_leave_actor_unchanged() {
        let (mut agents, mut critic, mut cfg) = bandit_setup(3e-3, 0.0);
        cfg.entropy_weight = 0.0;
        let before = agents[0].policy.flat_params();
        let mut buffer = RolloutBuffer::new(1, 16);
        let mut rng = crate::rng::stream(71, "bandit", &[1]);
        for _ in 0..16 {
            let obs = Observation { features: vec![1.0] };
            let sample = agents[0].policy.act(&obs, &mut rng, ActMode::Stochastic).unwrap();
            // Reward 0 and value 0 everywhere: GAE is identically zero.
            buffer.push(0, vec![1.0], vec![1.0], sample.pre_squash, sample.log_prob, 0.0, 0.0, false);
        }
        buffer.set_bootstrap(vec![0.0]);
        // Keep the critic away from the comparison by checking actor only.
        mappo_update(&mut agents, &mut critic, &mut buffer, &cfg, &mut rng).unwrap();
        assert_eq!(agents[0].policy.flat_params(), before);
    }

    #[test]
    fn contextual_bandit_learns_the_rewarding_action() {
        // Action in [0, 1]; reward 1 above the midpoint, 0 below. After 200
        // updates the policy should pick the rewarding side > 95% of the
        // time.
        let (mut agents, mut critic, mut cfg) = bandit_setup(3e-3, 1e-3);
        cfg.update_epochs = 4;
        let mut rng = crate::rng::stream(71, "bandit", &[2]);
        let rollout = 64usize;
        for _update in 0..200 {
            let mut buffer = RolloutBuffer::new(1, rollout);
            for _ in 0..rollout {
                let obs = Observation { features: vec![1.0] };
                let sample = agents[0].policy.act(&obs, &mut rng, ActMode::Stochastic).unwrap();
                let reward = if sample.bid_action[0] > 0.5 { 1.0 } else { 0.0 };
                let value = critic.value(0, &[1.0], &[1.0]).unwrap();
                buffer.push(
                    0,
                    vec![1.0],
                    vec![1.0],
                    sample.pre_squash,
                    sample.log_prob,
                    reward,
                    value,
                    true,
                );
            }
            buffer.set_bootstrap(vec![0.0]);
            mappo_update(&mut agents, &mut critic, &mut buffer, &cfg, &mut rng).unwrap();
        }
        let mut wins = 0usize;
        let trials = 1000usize;
        for _ in 0..trials {
            let obs = Observation { features: vec![1.0] };
            let s = agents[0].policy.act(&obs, &mut rng, ActMode::Stochastic).unwrap();
            if s.bid_action[0] > 0.5 {
                wins += 1;
            }
        }
        let frac = wins as f64 / trials as f64;
        assert!(frac > 0.95, "bandit policy picks the rewarding action {frac} of the time");
    }

    #[test]
    fn non_finite_rewards_abort_the_update_with_diagnostics() {
        let (mut agents, mut critic, cfg) = bandit_setup(3e-3, 1e-3);
        let mut buffer = RolloutBuffer::new(1, 8);
        let mut rng = crate::rng::stream(71, "bandit", &[4]);
        for i in 0..8 {
            let obs = Observation { features: vec![1.0] };
            let s = agents[0].policy.act(&obs, &mut rng, ActMode::Stochastic).unwrap();
            let reward = if i == 3 { f64::INFINITY } else { 0.5 };
            buffer.push(0, vec![1.0], vec![1.0], s.pre_squash, s.log_prob, reward, 0.0, true);
        }
        buffer.set_bootstrap(vec![0.0]);
        let err = mappo_update(&mut agents, &mut critic, &mut buffer, &cfg, &mut rng).unwrap_err();
        assert!(matches!(err, crate::error::Error::NonFinite(_)), "got {err:?}");
    }

    #[test]
    fn update_is_deterministic_given_seed() {
        let run = || {
            let (mut agents, mut critic, cfg) = bandit_setup(3e-3, 1e-3);
            let mut rng = crate::rng::stream(71, "bandit", &[3]);
            for _ in 0..3 {
                let mut buffer = RolloutBuffer::new(1, 32);
                for _ in 0..32 {
                    let obs = Observation { features: vec![1.0] };
                    let s = agents[0].policy.act(&obs, &mut rng, ActMode::Stochastic).unwrap();
                    let r = if s.bid_action[0] > 0.5 { 1.0 } else { 0.0 };
                    let v = critic.value(0, &[1.0], &[1.0]).unwrap();
                    buffer.push(0, vec![1.0], vec![1.0], s.pre_squash, s.log_prob, r, v, true);
                }
                buffer.set_bootstrap(vec![0.0]);
                mappo_update(&mut agents, &mut critic, &mut buffer, &cfg, &mut rng).unwrap();
            }
            agents[0].policy.flat_params()
        };
        assert_eq!(run(), run());
    }
}
