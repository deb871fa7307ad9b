//! Bidding policies: the MAPPO learner (per-agent actors, one centralized
//! critic, decentralized execution) and the actuarial, random, and
//! single-agent Q-learning baselines.

pub mod baselines;
pub mod buffer;
pub mod critic;
pub mod mappo;
pub mod policy;
pub mod qlearn;

pub use baselines::{actuarial_bid, expected_loss_fraction, random_bid, ActuarialCache};
pub use buffer::{GaeResult, RolloutBuffer};
pub use critic::{global_state, CentralCritic, CriticStack};
pub use mappo::{mappo_update, MappoAgent, UpdateStats};
pub use policy::{ActMode, ActionSample, GaussianPolicy};
pub use qlearn::{QBaselineState, QGrid, QTransition};
