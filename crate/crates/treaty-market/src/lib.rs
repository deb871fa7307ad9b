//! Competitive reinsurance treaty bidding with learning agents.
//!
//! This crate simulates a desk-scale reinsurance placement market: an insurer
//! issues one synthetic treaty per episode, autonomous reinsurer agents submit
//! sealed bids, and a stochastic utility mechanism with institutional
//! frictions (incumbent tolerance, last-look revision, broker information
//! asymmetry) selects the winner. Losses are realized from a two-part
//! attritional/catastrophe model, portfolios evolve, and agents are rewarded
//! on profit, tail risk (CVaR), and operational efficiency.
//!
//! The crate is organized around five building blocks:
//!
//! - [`market`] — treaty generation, loss realization, bid scoring, frictions,
//!   and the episode state machine.
//! - [`risk`] — scalar risk/performance measures (CVaR, Sharpe, loss ratio,
//!   diversification, Pareto frontier) and the statistical test kernel
//!   (Welch t, Kolmogorov–Smirnov, paired t, bootstrap CIs, one-way ANOVA).
//! - [`learn`] — self-contained numerics: dense networks with exact
//!   backpropagation, Adam, Ornstein–Uhlenbeck noise, bounded-action
//!   squashing, and finite-difference gradient verification.
//! - [`agents`] — the MAPPO learner (centralized critic, decentralized
//!   execution) and the actuarial / random / single-agent Q-learning
//!   baselines.
//! - [`experiments`] — the runnable surface: config, training loop, baseline
//!   tournament, λ and hyperparameter sweeps, stress studies, diagnostics,
//!   and all file outputs.
//!
//! Each major capability has a runnable example under `examples/`; the thin
//! `treaty-market` binary exposes the same entry points as subcommands.

pub mod agents;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod learn;
pub mod market;
pub mod risk;
pub mod rng;

pub use config::RunConfig;
pub use error::{Error, Result};
