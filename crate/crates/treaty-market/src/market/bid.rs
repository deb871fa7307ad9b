//! Bids, the admissible action box, and coverage payouts.

use serde::{Deserialize, Serialize};

use crate::config::EnvConfig;
use crate::learn::ActionBox;
use crate::market::treaty::{LossRealization, TreatyKind, TreatySpec};

/// Order of the continuous action dimensions as seen by policies.
pub const ACTION_DIM: usize = 5;
pub const A_RATE: usize = 0;
pub const A_QUOTA: usize = 1;
pub const A_COMMISSION: usize = 2;
pub const A_ATTACHMENT_OFFSET: usize = 3;
pub const A_LIMIT_FACTOR: usize = 4;

/// Admissible ranges for each bid component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidBox {
    pub rate: (f64, f64),
    pub quota: (f64, f64),
    pub commission: (f64, f64),
    pub attachment_offset: (f64, f64),
    pub limit_factor: (f64, f64),
}

impl BidBox {
    pub fn from_env(cfg: &EnvConfig) -> Self {
        BidBox {
            rate: (cfg.rate_min, cfg.rate_max),
            quota: (cfg.quota_min, cfg.quota_max),
            commission: (0.0, cfg.commission_max),
            attachment_offset: (-cfg.attachment_offset_max, cfg.attachment_offset_max),
            limit_factor: (cfg.limit_factor_min, cfg.limit_factor_max),
        }
    }

    /// The box in policy-action order.
    pub fn action_box(&self) -> ActionBox {
        ActionBox::new(
            vec![
                self.rate.0,
                self.quota.0,
                self.commission.0,
                self.attachment_offset.0,
                self.limit_factor.0,
            ],
            vec![
                self.rate.1,
                self.quota.1,
                self.commission.1,
                self.attachment_offset.1,
                self.limit_factor.1,
            ],
        )
        .expect("validated config produces a valid box")
    }
}

/// An agent's quote. Components inert for the treaty kind are pinned to
/// neutral values at construction; construction clamps into the box and
/// records whether clamping occurred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub agent_id: usize,
    pub premium_rate: f64,
    pub quota: f64,
    pub ceding_commission: f64,
    pub attachment_offset: f64,
    pub limit_factor: f64,
    /// Submission latency in milliseconds; stamped by the environment.
    pub submitted_at: f64,
    pub clamped: bool,
}

impl Bid {
    /// Build a bid from a raw 5-dimensional action vector.
    pub fn from_action(
        agent_id: usize,
        kind: TreatyKind,
        action: &[f64; ACTION_DIM],
        bounds: &BidBox,
    ) -> Bid {
        let mut clamped = false;
        let mut clamp = |v: f64, (lo, hi): (f64, f64)| -> f64 {
            let c = v.clamp(lo, hi);
            if c != v {
                clamped = true;
            }
            c
        };
        let premium_rate = clamp(action[A_RATE], bounds.rate);
        let (quota, ceding_commission, attachment_offset, limit_factor) = match kind {
            TreatyKind::ExcessOfLoss => (
                0.0,
                0.0,
                clamp(action[A_ATTACHMENT_OFFSET], bounds.attachment_offset),
                clamp(action[A_LIMIT_FACTOR], bounds.limit_factor),
            ),
            TreatyKind::QuotaShare => (
                clamp(action[A_QUOTA], bounds.quota),
                clamp(action[A_COMMISSION], bounds.commission),
                0.0,
                1.0,
            ),
        };
        Bid {
            agent_id,
            premium_rate,
            quota,
            ceding_commission,
            attachment_offset,
            limit_factor,
            submitted_at: 0.0,
            clamped,
        }
    }

    /// Treaty-neutral coverage terms at a given premium rate: midpoint
    /// quota, unmodified layer, zero ceding commission (under the scoring
    /// rule a commission both lowers coverage quality and costs money, so
    /// the neutral quote gives none away).
    pub fn neutral(agent_id: usize, kind: TreatyKind, premium_rate: f64, bounds: &BidBox) -> Bid {
        let mut action = [0.0; ACTION_DIM];
        action[A_RATE] = premium_rate;
        action[A_QUOTA] = 0.5 * (bounds.quota.0 + bounds.quota.1);
        action[A_COMMISSION] = bounds.commission.0;
        action[A_ATTACHMENT_OFFSET] = 0.0;
        action[A_LIMIT_FACTOR] = 1.0;
        Bid::from_action(agent_id, kind, &action, bounds)
    }

    /// Premium amount the insurer pays if this bid binds the treaty.
    pub fn premium_amount(&self, treaty: &TreatySpec) -> f64 {
        self.premium_rate * treaty.exposure
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Payout {
    pub reinsurer_claim: f64,
    pub insurer_recovery: f64,
    pub commission: f64,
}

/// Settle a realized loss under the bound terms.
///
/// Excess-of-loss pays the layer `[attachment·(1+offset), +limit·factor]` on
/// the total loss with no commission; quota share pays the quota fraction of
/// the total loss and returns `ceding_commission · quota · premium`.
pub fn coverage_payout(treaty: &TreatySpec, bid: &Bid, loss: &LossRealization) -> Payout {
    let total = loss.total();
    match treaty.treaty_kind {
        TreatyKind::ExcessOfLoss => {
            let effective_attachment = treaty.attachment * (1.0 + bid.attachment_offset);
            let effective_limit = treaty.limit * bid.limit_factor;
            let claim = (total - effective_attachment).max(0.0).min(effective_limit);
            Payout { reinsurer_claim: claim, insurer_recovery: claim, commission: 0.0 }
        }
        TreatyKind::QuotaShare => {
            let claim = bid.quota * total;
            let commission = bid.ceding_commission * bid.quota * bid.premium_amount(treaty);
            Payout { reinsurer_claim: claim, insurer_recovery: claim, commission }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn xol_treaty(attachment: f64, limit: f64) -> TreatySpec {
        TreatySpec {
            id: 0,
            treaty_kind: TreatyKind::ExcessOfLoss,
            exposure: 1000.0,
            line: 0,
            attachment,
            limit,
            retention: 0.2,
            attritional_freq: 1.0,
            attritional_severity_mean: 1.0,
            attritional_severity_sigma: 1.0,
            cat_prob: 0.0,
            cat_tail_index: 2.5,
            cat_scale: 1.0,
        }
    }

    fn qs_treaty() -> TreatySpec {
        TreatySpec { treaty_kind: TreatyKind::QuotaShare, ..xol_treaty(100.0, 30.0) }
    }

    fn wide_box() -> BidBox {
        BidBox {
            rate: (0.0, 1.0),
            quota: (0.0, 1.0),
            commission: (0.0, 0.5),
            attachment_offset: (-0.5, 0.5),
            limit_factor: (0.5, 1.5),
        }
    }

    fn bid(kind: TreatyKind, action: [f64; ACTION_DIM]) -> Bid {
        Bid::from_action(0, kind, &action, &wide_box())
    }

    #[test]
    fn xol_loss_above_layer_pays_the_limit() {
        let t = xol_treaty(100.0, 30.0);
        let b = bid(TreatyKind::ExcessOfLoss, [0.1, 0.0, 0.0, 0.0, 1.0]);
        let loss = LossRealization { attritional_total: 150.0, cat_total: 0.0 };
        let p = coverage_payout(&t, &b, &loss);
        assert_relative_eq!(p.reinsurer_claim, 30.0);
        assert_relative_eq!(p.commission, 0.0);
    }

    #[test]
    fn xol_loss_below_attachment_pays_nothing() {
        let t = xol_treaty(100.0, 30.0);
        let b = bid(TreatyKind::ExcessOfLoss, [0.1, 0.0, 0.0, 0.0, 1.0]);
        let loss = LossRealization { attritional_total: 80.0, cat_total: 0.0 };
        assert_eq!(coverage_payout(&t, &b, &loss).reinsurer_claim, 0.0);
    }

    #[test]
    fn quota_share_direct_formula() {
        let t = qs_treaty();
        // premium 50 on exposure 1000 → rate 0.05; quota 0.3, commission 0.1.
        let b = bid(TreatyKind::QuotaShare, [0.05, 0.3, 0.1, 0.0, 1.0]);
        let loss = LossRealization { attritional_total: 100.0, cat_total: 0.0 };
        let p = coverage_payout(&t, &b, &loss);
        assert_relative_eq!(p.reinsurer_claim, 30.0);
        assert_relative_eq!(p.commission, 1.5);
    }

    #[test]
    fn construction_clamps_and_records() {
        let b = bid(TreatyKind::ExcessOfLoss, [2.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(b.premium_rate, 1.0);
        assert!(b.clamped);
        let b = bid(TreatyKind::ExcessOfLoss, [0.3, 0.0, 0.0, 0.1, 1.2]);
        assert!(!b.clamped);
    }

    #[test]
    fn inert_components_are_pinned() {
        let b = bid(TreatyKind::ExcessOfLoss, [0.3, 0.7, 0.2, 0.1, 1.2]);
        assert_eq!((b.quota, b.ceding_commission), (0.0, 0.0));
        let b = bid(TreatyKind::QuotaShare, [0.3, 0.7, 0.2, 0.1, 1.2]);
        assert_eq!((b.attachment_offset, b.limit_factor), (0.0, 1.0));
    }

    proptest! {
        /// Payout bounds: 0 ≤ claim ≤ effective limit (XoL) and
        /// 0 ≤ claim ≤ quota·total ≤ total (quota share).
        #[test]
        fn payout_bounds_hold(
            rate in 0.0..1.0f64,
            quota in 0.0..1.0f64,
            commission in 0.0..0.5f64,
            offset in -0.5..0.5f64,
            factor in 0.5..1.5f64,
            attritional in 0.0..500.0f64,
            cat in 0.0..2000.0f64,
            is_qs in proptest::bool::ANY,
        ) {
            let kind = if is_qs { TreatyKind::QuotaShare } else { TreatyKind::ExcessOfLoss };
            let t = TreatySpec { treaty_kind: kind, ..xol_treaty(100.0, 30.0) };
            let b = bid(kind, [rate, quota, commission, offset, factor]);
            let loss = LossRealization { attritional_total: attritional, cat_total: cat };
            let p = coverage_payout(&t, &b, &loss);
            prop_assert!(p.reinsurer_claim >= 0.0);
            match kind {
                TreatyKind::ExcessOfLoss => {
                    prop_assert!(p.reinsurer_claim <= t.limit * b.limit_factor + 1e-12);
                    prop_assert!(p.commission == 0.0);
                }
                TreatyKind::QuotaShare => {
                    let total = loss.total();
                    prop_assert!(p.reinsurer_claim <= b.quota * total + 1e-12);
                    prop_assert!(b.quota * total <= total + 1e-12);
                }
            }
        }
    }
}
