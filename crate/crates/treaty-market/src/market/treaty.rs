//! Treaty generation and the two-part loss model: compound-Poisson
//! lognormal attritional claims plus a Bernoulli-occurrence Pareto
//! catastrophe severity.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::config::EnvConfig;
use crate::error::{Error, Result};
use crate::rng::uniform_in;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreatyKind {
    ExcessOfLoss,
    QuotaShare,
}

/// One treaty offering. Severity parameters are absolute (already scaled by
/// this treaty's exposure at generation time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatySpec {
    pub id: u64,
    pub treaty_kind: TreatyKind,
    pub exposure: f64,
    pub line: usize,
    pub attachment: f64,
    pub limit: f64,
    pub retention: f64,
    pub attritional_freq: f64,
    pub attritional_severity_mean: f64,
    pub attritional_severity_sigma: f64,
    pub cat_prob: f64,
    pub cat_tail_index: f64,
    pub cat_scale: f64,
}

impl TreatySpec {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.exposure <= 0.0 {
            problems.push(format!("exposure must be positive, got {}", self.exposure));
        }
        if self.limit <= 0.0 {
            problems.push(format!("limit must be positive, got {}", self.limit));
        }
        if self.attachment < 0.0 {
            problems.push(format!("attachment must be >= 0, got {}", self.attachment));
        }
        if self.attachment >= self.attachment + self.limit {
            problems.push("layer is degenerate (attachment >= attachment + limit)".into());
        }
        if !(0.0..=1.0).contains(&self.retention) {
            problems.push(format!("retention must lie in [0, 1], got {}", self.retention));
        }
        if self.cat_tail_index <= 1.0 {
            problems.push(format!(
                "cat_tail_index must exceed 1 for a finite mean, got {}",
                self.cat_tail_index
            ));
        }
        if !(0.0..=1.0).contains(&self.cat_prob) {
            problems.push(format!("cat_prob must lie in [0, 1], got {}", self.cat_prob));
        }
        if self.cat_scale <= 0.0 {
            problems.push(format!("cat_scale must be positive, got {}", self.cat_scale));
        }
        if self.attritional_freq < 0.0 {
            problems.push("attritional_freq must be >= 0".into());
        }
        if self.attritional_severity_mean <= 0.0 || self.attritional_severity_sigma <= 0.0 {
            problems.push("attritional severity parameters must be positive".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Worst claimable amount under the admissible action box; drives the
    /// capital participation gate.
    pub fn max_claimable(&self, limit_factor_max: f64, quota_max: f64) -> f64 {
        match self.treaty_kind {
            TreatyKind::ExcessOfLoss => self.limit * limit_factor_max,
            TreatyKind::QuotaShare => quota_max * self.exposure,
        }
    }
}

/// Draw one treaty from the configured generation distributions.
///
/// The draw order is fixed (exposure, line, attachment, limit, retention,
/// kind) and none of these consume stress-dependent randomness, so matched
/// stress arms see identical draws. Catastrophe parameters may be scaled by
/// an active stress regime through `cat_prob`/`cat_scale` in `cfg`.
pub fn generate_treaty(rng: &mut impl Rng, cfg: &EnvConfig, id: u64) -> Result<TreatySpec> {
    let exposure =
        LogNormal::new(cfg.exposure_mu, cfg.exposure_sigma)
            .map_err(|e| Error::Config(format!("exposure distribution: {e}")))?
            .sample(rng);
    let line = rng.random_range(0..cfg.n_lines);
    let attachment =
        exposure * uniform_in(rng, cfg.attachment_frac_min, cfg.attachment_frac_max);
    let limit = exposure * uniform_in(rng, cfg.limit_frac_min, cfg.limit_frac_max);
    let retention = uniform_in(rng, cfg.retention_min, cfg.retention_max);
    let treaty_kind = if rng.random::<f64>() < cfg.quota_share_prob {
        TreatyKind::QuotaShare
    } else {
        TreatyKind::ExcessOfLoss
    };
    let treaty = TreatySpec {
        id,
        treaty_kind,
        exposure,
        line,
        attachment,
        limit,
        retention,
        attritional_freq: cfg.attritional_freq,
        attritional_severity_mean: cfg.attritional_severity_mean * exposure,
        attritional_severity_sigma: cfg.attritional_severity_sigma,
        cat_prob: cfg.cat_prob,
        cat_tail_index: cfg.cat_tail_index,
        cat_scale: cfg.cat_scale * exposure,
    };
    treaty.validate()?;
    Ok(treaty)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRealization {
    pub attritional_total: f64,
    pub cat_total: f64,
}

impl LossRealization {
    pub fn total(&self) -> f64 {
        self.attritional_total + self.cat_total
    }
}

/// Realize one period of losses for a treaty.
///
/// Attritional: N ~ Poisson(freq) lognormal severities parameterized so the
/// configured mean is the true mean (μ = ln(mean) − σ²/2). Catastrophe: the
/// occurrence uniform and the severity uniform are always drawn — whether or
/// not the event fires — so stressed and baseline arms consume identical
/// randomness; severity is the inverse-CDF Pareto draw scale·(1−u)^(−1/α).
pub fn sample_losses(treaty: &TreatySpec, rng: &mut impl Rng) -> LossRealization {
    let attritional_total = if treaty.attritional_freq > 0.0 {
        let n = Poisson::new(treaty.attritional_freq)
            .expect("validated frequency")
            .sample(rng) as u64;
        let mu = treaty.attritional_severity_mean.ln()
            - treaty.attritional_severity_sigma.powi(2) / 2.0;
        let severity = LogNormal::new(mu, treaty.attritional_severity_sigma)
            .expect("validated sigma");
        (0..n).map(|_| severity.sample(rng)).sum()
    } else {
        0.0
    };

    let occurrence: f64 = rng.random();
    let severity_u: f64 = rng.random();
    let cat_total = if occurrence < treaty.cat_prob {
        treaty.cat_scale * (1.0 - severity_u).powf(-1.0 / treaty.cat_tail_index)
    } else {
        0.0
    };

    LossRealization { attritional_total, cat_total }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn base_cfg() -> EnvConfig {
        EnvConfig::default()
    }

    #[test]
    fn generated_treaties_satisfy_invariants() {
        let cfg = base_cfg();
        let mut rng = stream(0, "treaty-test", &[0]);
        for id in 0..200 {
            let t = generate_treaty(&mut rng, &cfg, id).unwrap();
            assert!(t.exposure > 0.0);
            assert!(t.attachment < t.attachment + t.limit);
            assert!(t.cat_tail_index > 1.0);
            assert!((0.0..=1.0).contains(&t.retention));
            assert!(t.line < cfg.n_lines);
        }
    }

    #[test]
    fn generation_is_deterministic_given_rng_state() {
        let cfg = base_cfg();
        let a = generate_treaty(&mut stream(9, "t", &[3]), &cfg, 3).unwrap();
        let b = generate_treaty(&mut stream(9, "t", &[3]), &cfg, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_config_yields_point_mass_treaty() {
        let mut cfg = base_cfg();
        cfg.exposure_sigma = 0.0;
        cfg.attachment_frac_min = 0.2;
        cfg.attachment_frac_max = 0.2;
        cfg.limit_frac_min = 0.3;
        cfg.limit_frac_max = 0.3;
        cfg.retention_min = 0.25;
        cfg.retention_max = 0.25;
        cfg.quota_share_prob = 0.0;
        let mut rng = stream(0, "treaty-test", &[1]);
        let t = generate_treaty(&mut rng, &cfg, 0).unwrap();
        assert!((t.exposure - 1.0).abs() < 1e-12);
        assert!((t.attachment - 0.2).abs() < 1e-12);
        assert!((t.limit - 0.3).abs() < 1e-12);
        assert!((t.retention - 0.25).abs() < 1e-12);
        assert_eq!(t.treaty_kind, TreatyKind::ExcessOfLoss);
    }

    #[test]
    fn exposure_monte_carlo_matches_lognormal_mean() {
        let cfg = base_cfg();
        let mut rng = stream(4, "treaty-test", &[2]);
        let n = 100_000;
        let mut sum = 0.0;
        for id in 0..n {
            sum += generate_treaty(&mut rng, &cfg, id).unwrap().exposure;
        }
        let mc_mean = sum / n as f64;
        let closed_form = (cfg.exposure_mu + cfg.exposure_sigma.powi(2) / 2.0).exp();
        assert!(
            (mc_mean - closed_form).abs() / closed_form < 0.02,
            "MC mean {mc_mean} vs closed form {closed_form}"
        );
    }

    #[test]
    fn invalid_tail_index_is_rejected_at_construction() {
        let mut cfg = base_cfg();
        cfg.cat_tail_index = 1.0;
        let mut rng = stream(0, "treaty-test", &[3]);
        assert!(generate_treaty(&mut rng, &cfg, 0).is_err());
    }

    fn test_treaty(freq: f64, cat_prob: f64, cat_alpha: f64, cat_scale: f64) -> TreatySpec {
        TreatySpec {
            id: 0,
            treaty_kind: TreatyKind::ExcessOfLoss,
            exposure: 1.0,
            line: 0,
            attachment: 0.1,
            limit: 0.3,
            retention: 0.2,
            attritional_freq: freq,
            attritional_severity_mean: 0.02,
            attritional_severity_sigma: 1.0,
            cat_prob,
            cat_tail_index: cat_alpha,
            cat_scale,
        }
    }

    #[test]
    fn zero_frequency_and_probability_give_zero_losses() {
        let t = test_treaty(0.0, 0.0, 2.5, 0.05);
        let mut rng = stream(1, "loss-test", &[0]);
        for _ in 0..100 {
            let l = sample_losses(&t, &mut rng);
            assert_eq!((l.attritional_total, l.cat_total), (0.0, 0.0));
        }
    }

    #[test]
    fn attritional_mean_matches_compound_poisson_identity() {
        // E[total] = freq × E[severity]; one million draws land within 1%.
        let t = test_treaty(3.0, 0.0, 2.5, 0.05);
        let mut rng = stream(2, "loss-test", &[1]);
        let n = 1_000_000u64;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += sample_losses(&t, &mut rng).attritional_total;
        }
        let mc = sum / n as f64;
        let expected = t.attritional_freq * t.attritional_severity_mean;
        assert!(
            (mc - expected).abs() / expected < 0.01,
            "MC {mc} vs compound-Poisson mean {expected}"
        );
    }

    #[test]
    fn cat_mean_matches_pareto_identity() {
        // α = 2, scale = s has mean α·s/(α−1) = 2s.
        let s = 0.04;
        let t = test_treaty(0.0, 1.0, 2.0, s);
        let mut rng = stream(3, "loss-test", &[2]);
        let n = 1_000_000u64;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += sample_losses(&t, &mut rng).cat_total;
        }
        let mc = sum / n as f64;
        let expected = 2.0 * s;
        assert!(
            (mc - expected).abs() / expected < 0.03,
            "MC {mc} vs Pareto mean {expected}"
        );
    }

    #[test]
    fn losses_are_non_negative() {
        let t = test_treaty(3.0, 0.3, 2.5, 0.05);
        let mut rng = stream(5, "loss-test", &[3]);
        for _ in 0..10_000 {
            let l = sample_losses(&t, &mut rng);
            assert!(l.attritional_total >= 0.0 && l.cat_total >= 0.0);
        }
    }

    #[test]
    fn stressed_and_baseline_arms_share_random_draws() {
        // Tripling cat_prob/cat_scale must not shift any other draw: the
        // same stream yields identical attritional totals and the stressed
        // cat loss is exactly the multiplier times the baseline one whenever
        // both arms fire.
        let base = test_treaty(3.0, 0.2, 2.5, 0.05);
        let mut stressed = base.clone();
        stressed.cat_prob = (3.0 * base.cat_prob).min(1.0);
        stressed.cat_scale = 3.0 * base.cat_scale;

        for episode in 0..2_000u64 {
            let la = sample_losses(&base, &mut stream(7, "losses", &[episode]));
            let lb = sample_losses(&stressed, &mut stream(7, "losses", &[episode]));
            assert_eq!(la.attritional_total, lb.attritional_total);
            if la.cat_total > 0.0 {
                assert!(lb.cat_total > 0.0);
                assert!((lb.cat_total / la.cat_total - 3.0).abs() < 1e-9);
            }
        }
    }
}
