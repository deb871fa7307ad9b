//! Tanh squashing between unbounded network outputs and a bounded,
//! per-dimension action box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-dimension closed interval bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ActionBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension("action box bounds must have equal length".into()));
        }
        for (i, (l, h)) in lo.iter().zip(hi.iter()).enumerate() {
            if l >= h || !l.is_finite() || !h.is_finite() {
                return Err(Error::Config(format!(
                    "action box dimension {i} invalid: [{l}, {h}]"
                )));
            }
        }
        Ok(ActionBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lo.iter().zip(self.hi.iter()).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .all(|(x, (l, h))| l <= x && x <= h)
    }

    pub fn clamp(&self, point: &[f64]) -> Vec<f64> {
        point
            .iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .map(|(x, (l, h))| x.clamp(*l, *h))
            .collect()
    }
}

// Keeps tanh output strictly inside (−1, 1) so squashed actions stay strictly
// interior even when the raw value saturates in floating point.
const TANH_GUARD: f64 = 1.0 - 1e-12;

/// Componentwise `lo + (hi − lo)·(tanh(raw)+1)/2`, strictly interior.
pub fn squash_action(raw: &[f64], bounds: &ActionBox) -> Result<Vec<f64>> {
    if raw.len() != bounds.dim() {
        return Err(Error::Dimension(format!(
            "raw action length {} does not match box dimension {}",
            raw.len(),
            bounds.dim()
        )));
    }
    Ok(raw
        .iter()
        .zip(bounds.lo.iter().zip(bounds.hi.iter()))
        .map(|(x, (l, h))| {
            let t = x.tanh().clamp(-TANH_GUARD, TANH_GUARD);
            l + (h - l) * (t + 1.0) / 2.0
        })
        .collect())
}

/// Exact inverse of `squash_action` on interior points.
pub fn unsquash_action(bounded: &[f64], bounds: &ActionBox) -> Result<Vec<f64>> {
    if bounded.len() != bounds.dim() {
        return Err(Error::Dimension(format!(
            "bounded action length {} does not match box dimension {}",
            bounded.len(),
            bounds.dim()
        )));
    }
    Ok(bounded
        .iter()
        .zip(bounds.lo.iter().zip(bounds.hi.iter()))
        .map(|(a, (l, h))| {
            let t = (2.0 * (a - l) / (h - l) - 1.0).clamp(-TANH_GUARD, TANH_GUARD);
            t.atanh()
        })
        .collect())
}

/// Σ_i log |da_i/dx_i| for the squash map, evaluated at the pre-squash point.
///
/// Uses log(1 − tanh²x) = 2(ln 2 − x − softplus(−2x)) for stability at large
/// |x|.
pub fn squash_log_jacobian(raw: &[f64], bounds: &ActionBox) -> f64 {
    raw.iter()
        .zip(bounds.lo.iter().zip(bounds.hi.iter()))
        .map(|(x, (l, h))| {
            let softplus = |t: f64| {
                if t > 30.0 {
                    t
                } else {
                    t.exp().ln_1p()
                }
            };
            let log_sech2 = 2.0 * (std::f64::consts::LN_2 - x - softplus(-2.0 * x));
            ((h - l) / 2.0).ln() + log_sech2
        })
        .sum()
}
