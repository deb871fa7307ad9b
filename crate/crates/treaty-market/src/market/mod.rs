//! The reinsurance placement market: treaty generation, the two-part loss
//! model, bid scoring with institutional frictions, and the episode state
//! machine that advances portfolios.

pub mod bid;
pub mod env;
pub mod scoring;
pub mod treaty;

pub use bid::{coverage_payout, Bid, BidBox, Payout};
pub use env::{
    observation_dim, treaty_feature_dim, treaty_feature_vec, AgentEpisodeRecord,
    EpisodeLogRecord, MarketContext, MarketEnv, Observation, PortfolioState, StepOutcome,
};
pub use scoring::{
    coverage_quality, last_look, score_bid, select_winner, InsurerPreferences, PlacementOutcome,
    SelectionResult,
};
pub use treaty::{generate_treaty, sample_losses, LossRealization, TreatyKind, TreatySpec};
