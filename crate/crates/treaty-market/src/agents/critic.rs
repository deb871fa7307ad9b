//! Value estimation: the shared centralized critic (CTDE) and the
//! local-critic configuration used by the ablation.

use rand::Rng;

use crate::error::{Error, Result};
use crate::learn::{AdamState, DenseNet};
use crate::market::Observation;

/// Global training-time state: treaty features followed by every agent's
/// observation vector in fixed agent-index order.
pub fn global_state(observations: &[Observation], treaty_features: &[f64]) -> Result<Vec<f64>> {
    if observations.is_empty() {
        return Err(Error::EmptySamples("global_state needs every agent's observation".into()));
    }
    let obs_dim = observations[0].dim();
    if observations.iter().any(|o| o.dim() != obs_dim) {
        return Err(Error::Dimension("observations disagree on dimension".into()));
    }
    let mut state = Vec::with_capacity(treaty_features.len() + observations.len() * obs_dim);
    state.extend_from_slice(treaty_features);
    for obs in observations {
        state.extend_from_slice(&obs.features);
    }
    Ok(state)
}

/// One critic shared by all agents, conditioned on the global state plus an
/// agent one-hot so per-agent returns get per-agent values. Used only during
/// training.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralCritic {
    pub net: DenseNet,
    pub n_agents: usize,
    pub global_dim: usize,
}

impl CentralCritic {
    pub fn new(
        global_dim: usize,
        n_agents: usize,
        hidden: &[usize],
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut sizes = vec![global_dim + n_agents];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Ok(CentralCritic { net: DenseNet::init(&sizes, rng)?, n_agents, global_dim })
    }

    pub fn input(&self, global: &[f64], agent: usize) -> Result<Vec<f64>> {
        if global.len() != self.global_dim {
            return Err(Error::Dimension(format!(
                "global state dim {} does not match critic {}",
                global.len(),
                self.global_dim
            )));
        }
        if agent >= self.n_agents {
            return Err(Error::Contract(format!("agent {agent} out of range")));
        }
        let mut input = Vec::with_capacity(self.global_dim + self.n_agents);
        input.extend_from_slice(global);
        for a in 0..self.n_agents {
            input.push(if a == agent { 1.0 } else { 0.0 });
        }
        Ok(input)
    }

    pub fn value(&self, global: &[f64], agent: usize) -> Result<f64> {
        Ok(self.net.infer(&self.input(global, agent)?)?[0])
    }
}

/// Either one central critic over the global state or per-agent local
/// critics over private observations.
#[derive(Debug, Clone)]
pub enum CriticStack {
    Central { critic: CentralCritic, adam: AdamState },
    Local { critics: Vec<DenseNet>, adams: Vec<AdamState> },
}

impl CriticStack {
    pub fn new_central(
        global_dim: usize,
        n_agents: usize,
        hidden: &[usize],
        lr: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let critic = CentralCritic::new(global_dim, n_agents, hidden, rng)?;
        let adam = AdamState::new(critic.net.param_count(), lr);
        Ok(CriticStack::Central { critic, adam })
    }

    pub fn new_local(
        obs_dim: usize,
        n_agents: usize,
        hidden: &[usize],
        lr: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let critics: Vec<DenseNet> =
            (0..n_agents).map(|_| DenseNet::init(&sizes, rng)).collect::<Result<_>>()?;
        let adams = critics.iter().map(|c| AdamState::new(c.param_count(), lr)).collect();
        Ok(CriticStack::Local { critics, adams })
    }

    /// Value estimate for one agent at one step.
    pub fn value(&self, agent: usize, observation: &[f64], global: &[f64]) -> Result<f64> {
        match self {
            CriticStack::Central { critic, .. } => critic.value(global, agent),
            CriticStack::Local { critics, .. } => Ok(critics[agent].infer(observation)?[0]),
        }
    }

    /// Critic input vector for one (agent, step) training sample.
    pub fn training_input(
        &self,
        agent: usize,
        observation: &[f64],
        global: &[f64],
    ) -> Result<Vec<f64>> {
        match self {
            CriticStack::Central { critic, .. } => critic.input(global, agent),
            CriticStack::Local { .. } => Ok(observation.to_vec()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(v: Vec<f64>) -> Observation {
        Observation { features: v }
    }

    #[test]
    fn global_state_is_a_fixed_order_concatenation() {
        let t = vec![9.0, 8.0];
        let o0 = obs(vec![1.0, 2.0]);
        let o1 = obs(vec![3.0, 4.0]);
        let g = global_state(&[o0.clone(), o1.clone()], &t).unwrap();
        assert_eq!(g, vec![9.0, 8.0, 1.0, 2.0, 3.0, 4.0]);

        // Swapping two agents' slots swaps exactly those slots.
        let swapped = global_state(&[o1, o0], &t).unwrap();
        assert_eq!(swapped, vec![9.0, 8.0, 3.0, 4.0, 1.0, 2.0]);
    }

    #[test]
    fn global_state_dimension_arithmetic() {
        let t = vec![0.0; 9];
        let observations: Vec<Observation> = (0..3).map(|_| obs(vec![0.0; 15])).collect();
        let g = global_state(&observations, &t).unwrap();
        assert_eq!(g.len(), 9 + 3 * 15);
    }

    #[test]
    fn global_state_decomposes_field_by_field() {
        let t = vec![0.5, -0.5, 2.0];
        let observations: Vec<Observation> =
            (0..2).map(|a| obs(vec![a as f64, 10.0 + a as f64])).collect();
        let g = global_state(&observations, &t).unwrap();
        // Reconstruct the inputs from the flat vector.
        assert_eq!(&g[..3], &t[..]);
        for a in 0..2 {
            let start = 3 + a * 2;
            assert_eq!(&g[start..start + 2], &observations[a].features[..]);
        }
    }

    #[test]
    fn missing_observation_is_an_error() {
        assert!(global_state(&[], &[1.0]).is_err());
    }

    #[test]
    fn central_critic_conditions_on_agent_identity() {
        let mut rng = crate::rng::stream(2, "critic-test", &[]);
        let critic = CentralCritic::new(4, 3, &[8], &mut rng).unwrap();
        let g = vec![0.1, 0.2, 0.3, 0.4];
        let v0 = critic.value(&g, 0).unwrap();
        let v1 = critic.value(&g, 1).unwrap();
        // With random weights the odds of exact equality are negligible.
        assert_ne!(v0, v1);
        assert!(critic.value(&[0.0; 3], 0).is_err());
        assert!(critic.value(&g, 3).is_err());
    }
}
