//! Two-sample and paired statistical tests with self-contained p-value
//! evaluation: the Student-t tail comes from the regularized incomplete beta
//! function and the Kolmogorov–Smirnov tail from the Kolmogorov series, so
//! the numerical core carries no external statistics dependency.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatMethod {
    WelchT,
    Ks,
    PairedT,
    Bootstrap,
}

/// Result of a two-sample or paired test. `ci_low`/`ci_high` are populated by
/// the bootstrap only; `degenerate` marks zero-dispersion inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub statistic: f64,
    pub p_value: f64,
    pub mean_difference: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub method: StatMethod,
    pub degenerate: bool,
}

impl StatReport {
    fn new(method: StatMethod, statistic: f64, p_value: f64, mean_difference: f64) -> Self {
        StatReport {
            statistic,
            p_value,
            mean_difference,
            ci_low: None,
            ci_high: None,
            method,
            degenerate: false,
        }
    }
}

/// One-way ANOVA summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaReport {
    pub f_statistic: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p_value: f64,
}

/// OLS trend of a series against its index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub slope: f64,
    pub intercept: f64,
    /// Two-tailed p-value for slope = 0.
    pub p_value: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

/// Log-gamma via the Lanczos approximation (g = 7, 9 coefficients).
#[allow(clippy::excessive_precision)] // Lanczos coefficients as published
pub(crate) fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.999_999_999_999_809_93;
    for (i, c) in COEFFS.iter().enumerate() {
        acc += c / (x + (i + 1) as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta I_x(a, b) via the Lentz continued fraction.
pub(crate) fn incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(x, a, b) / a
    } else {
        1.0 - incomplete_beta(1.0 - x, b, a)
    }
}

fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Two-tailed Student-t p-value via I_{df/(df+t²)}(df/2, 1/2).
pub(crate) fn student_t_two_tailed(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    incomplete_beta(x, df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Kolmogorov survival function Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²λ²).
pub(crate) fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// F-distribution survival via I_{d2/(d2+d1·F)}(d2/2, d1/2).
pub(crate) fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if !f.is_finite() {
        return 0.0;
    }
    if f <= 0.0 {
        return 1.0;
    }
    incomplete_beta(d2 / (d2 + d1 * f), d2 / 2.0, d1 / 2.0).clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

/// Welch's unequal-variance t-test, two-tailed, with Welch–Satterthwaite
/// degrees of freedom.
pub fn welch_t(sample_a: &[f64], sample_b: &[f64]) -> Result<StatReport> {
    if sample_a.len() < 2 || sample_b.len() < 2 {
        return Err(Error::EmptySamples(format!(
            "welch_t requires at least two samples per group (got {}, {})",
            sample_a.len(),
            sample_b.len()
        )));
    }
    let (n1, n2) = (sample_a.len() as f64, sample_b.len() as f64);
    let (m1, m2) = (mean(sample_a), mean(sample_b));
    let (v1, v2) = (sample_variance(sample_a, m1), sample_variance(sample_b, m2));
    let (se1, se2) = (v1 / n1, v2 / n2);
    let se = (se1 + se2).sqrt();
    let diff = m1 - m2;
    if se == 0.0 {
        let mut report = StatReport::new(StatMethod::WelchT, 0.0, 1.0, diff);
        report.degenerate = true;
        if diff != 0.0 {
            report.statistic = f64::INFINITY.copysign(diff);
            report.p_value = 0.0;
        }
        return Ok(report);
    }
    let t = diff / se;
    let df = (se1 + se2).powi(2) / (se1 * se1 / (n1 - 1.0) + se2 * se2 / (n2 - 1.0));
    Ok(StatReport::new(StatMethod::WelchT, t, student_t_two_tailed(t, df), diff))
}

/// Two-sample Kolmogorov–Smirnov test. D is the exact supremum ECDF gap;
/// the p-value is the asymptotic Kolmogorov series at λ = √(n₁n₂/(n₁+n₂))·D.
pub fn ks_two_sample(sample_a: &[f64], sample_b: &[f64]) -> Result<StatReport> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::EmptySamples("ks_two_sample requires non-empty samples".into()));
    }
    let mut a = sample_a.to_vec();
    let mut b = sample_b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n1, n2) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let x = a[i].min(b[j]);
        while i < n1 && a[i] <= x {
            i += 1;
        }
        while j < n2 && b[j] <= x {
            j += 1;
        }
        let gap = (i as f64 / n1 as f64 - j as f64 / n2 as f64).abs();
        d = d.max(gap);
    }
    // Remaining tail of either sample cannot enlarge the gap beyond the value
    // at the last shared evaluation point; the loop above has already seen
    // every point where the ECDF difference can attain its supremum.
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let p = kolmogorov_survival(ne.sqrt() * d);
    Ok(StatReport::new(StatMethod::Ks, d, p, mean(sample_a) - mean(sample_b)))
}

/// Percentile bootstrap CI for mean(a) − mean(b).
///
/// Equal-length samples are resampled as pairs (shared indices), matching
/// the matched-seed design of the stress studies; unequal lengths fall back
/// to independent resampling.
pub fn bootstrap_ci(
    sample_a: &[f64],
    sample_b: &[f64],
    resamples: usize,
    level: f64,
    rng: &mut impl Rng,
) -> Result<StatReport> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::EmptySamples("bootstrap_ci requires non-empty samples".into()));
    }
    if resamples < 100 {
        return Err(Error::Contract(format!(
            "bootstrap_ci requires at least 100 resamples, got {resamples}"
        )));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::Contract(format!("bootstrap level must lie in (0,1), got {level}")));
    }
    let observed = mean(sample_a) - mean(sample_b);
    let paired = sample_a.len() == sample_b.len();
    let mut diffs = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let (ra, rb) = if paired {
            let n = sample_a.len();
            let mut sa = 0.0;
            let mut sb = 0.0;
            for _ in 0..n {
                let i = rng.random_range(0..n);
                sa += sample_a[i];
                sb += sample_b[i];
            }
            (sa / n as f64, sb / n as f64)
        } else {
            let ra: f64 = (0..sample_a.len())
                .map(|_| sample_a[rng.random_range(0..sample_a.len())])
                .sum::<f64>()
                / sample_a.len() as f64;
            let rb: f64 = (0..sample_b.len())
                .map(|_| sample_b[rng.random_range(0..sample_b.len())])
                .sum::<f64>()
                / sample_b.len() as f64;
            (ra, rb)
        };
        diffs.push(ra - rb);
    }
    diffs.sort_by(f64::total_cmp);
    let q = |p: f64| -> f64 {
        // Linearly interpolated quantile on the sorted resample diffs.
        let pos = p * (diffs.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        diffs[lo] + (diffs[hi] - diffs[lo]) * frac
    };
    let tail = (1.0 - level) / 2.0;
    let (ci_low, ci_high) = (q(tail), q(1.0 - tail));
    let frac_le = diffs.iter().filter(|d| **d <= 0.0).count() as f64 / diffs.len() as f64;
    let frac_ge = diffs.iter().filter(|d| **d >= 0.0).count() as f64 / diffs.len() as f64;
    let p = (2.0 * frac_le.min(frac_ge)).min(1.0);
    let mut report = StatReport::new(StatMethod::Bootstrap, observed, p, observed);
    report.ci_low = Some(ci_low);
    report.ci_high = Some(ci_high);
    Ok(report)
}

/// One-sample t-test of paired differences against zero, two-tailed.
pub fn paired_t(differences: &[f64]) -> Result<StatReport> {
    if differences.len() < 2 {
        return Err(Error::EmptySamples("paired_t requires at least two differences".into()));
    }
    let n = differences.len() as f64;
    let m = mean(differences);
    let var = sample_variance(differences, m);
    if var == 0.0 {
        let mut report = StatReport::new(StatMethod::PairedT, 0.0, 1.0, m);
        report.degenerate = true;
        if m != 0.0 {
            // Zero variance with nonzero mean: the t statistic diverges and
            // the p-value is reported at its limit.
            report.statistic = f64::INFINITY.copysign(m);
            report.p_value = 0.0;
        }
        return Ok(report);
    }
    let t = m / (var / n).sqrt();
    Ok(StatReport::new(StatMethod::PairedT, t, student_t_two_tailed(t, n - 1.0), m))
}

/// One-way ANOVA across groups of observations.
pub fn anova_one_way(groups: &[Vec<f64>]) -> Result<AnovaReport> {
    if groups.len() < 2 {
        return Err(Error::Degenerate(format!(
            "one-way ANOVA needs at least two groups, got {}",
            groups.len()
        )));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::EmptySamples("ANOVA groups must be non-empty".into()));
    }
    let n_total: usize = groups.iter().map(Vec::len).sum();
    let k = groups.len();
    if n_total <= k {
        return Err(Error::Degenerate("ANOVA requires more observations than groups".into()));
    }
    let grand = groups.iter().flatten().sum::<f64>() / n_total as f64;
    let ss_between: f64 = groups
        .iter()
        .map(|g| {
            let gm = mean(g);
            g.len() as f64 * (gm - grand).powi(2)
        })
        .sum();
    let ss_within: f64 = groups
        .iter()
        .map(|g| {
            let gm = mean(g);
            g.iter().map(|x| (x - gm).powi(2)).sum::<f64>()
        })
        .sum();
    let df_between = k - 1;
    let df_within = n_total - k;
    let ms_between = ss_between / df_between as f64;
    let ms_within = ss_within / df_within as f64;
    let f = if ms_within == 0.0 {
        if ms_between == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        ms_between / ms_within
    };
    Ok(AnovaReport {
        f_statistic: f,
        df_between,
        df_within,
        p_value: f_survival(f, df_between as f64, df_within as f64),
    })
}

/// OLS regression of `y` on its index 0..n with a two-tailed t-test on the
/// slope.
pub fn ols_trend(y: &[f64]) -> Result<TrendReport> {
    let n = y.len();
    if n < 3 {
        return Err(Error::EmptySamples("ols_trend requires at least three points".into()));
    }
    let nf = n as f64;
    let x_mean = (nf - 1.0) / 2.0;
    let y_mean = mean(y);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (i, &v) in y.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxx += dx * dx;
        sxy += dx * (v - y_mean);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res: f64 = y
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let fit = intercept + slope * i as f64;
            (v - fit).powi(2)
        })
        .sum();
    let df = nf - 2.0;
    let s2 = ss_res / df;
    if s2 == 0.0 {
        return Ok(TrendReport {
            slope,
            intercept,
            p_value: if slope == 0.0 { 1.0 } else { 0.0 },
        });
    }
    let se = (s2 / sxx).sqrt();
    let t = slope / se;
    Ok(TrendReport { slope, intercept, p_value: student_t_two_tailed(t, df) })
}
