//! Bernoulli likelihood-ratio scoring and odds-ratio effect measures.
//!
//! Under the null every record has outcome odds `mu / (1 - mu)`; under the
//! alternative the records of a subset share odds `q * mu / (1 - mu)` with
//! `q > 1`. The score of a subset with `n` records and `c` positives is the
//! log-likelihood ratio maximized over `q`:
//!
//! ```text
//! score = max_{q >= 1}  c * ln(q) - n * ln(1 - mu + q * mu)
//! ```
//!
//! The objective is concave in `ln q` with stationary point
//! `q* = c (1 - mu) / (mu (n - c))`, so the maximizer is available in closed
//! form. When every record is positive the objective grows without bound in
//! `q` and approaches `-n * ln(mu)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// z quantile for a two-sided 95% interval.
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorePanel {
    pub score: f64,
    /// Maximizing odds multiplier; infinite for an all-positive subset.
    #[serde(with = "infinite_as_null")]
    pub q_mle: f64,
    pub n_subset: usize,
    pub n_positive: usize,
    pub global_mean: f64,
    pub subset_mean: f64,
}

impl ScorePanel {
    /// An empty subset: no evidence, zero score.
    pub fn empty(global_mean: f64) -> Self {
        ScorePanel {
            score: 0.0,
            q_mle: 1.0,
            n_subset: 0,
            n_positive: 0,
            global_mean,
            subset_mean: 0.0,
        }
    }
}

fn check_inputs(n_positive: usize, n_subset: usize, global_mean: f64) -> Result<()> {
    if !(global_mean > 0.0 && global_mean < 1.0) {
        return Err(Error::contract(format!("global mean {global_mean} not in (0, 1)")));
    }
    if n_subset == 0 {
        return Err(Error::contract("subset is empty"));
    }
    if n_positive > n_subset {
        return Err(Error::contract(format!(
            "{n_positive} positives exceed subset size {n_subset}"
        )));
    }
    Ok(())
}

/// Score-maximizing odds multiplier, clamped at 1. Returns `f64::INFINITY`
/// when every record in the subset is positive.
pub fn optimal_q(n_positive: usize, n_subset: usize, global_mean: f64) -> Result<f64> {
    check_inputs(n_positive, n_subset, global_mean)?;
    Ok(optimal_q_unchecked(n_positive, n_subset, global_mean))
}

fn optimal_q_unchecked(c: usize, n: usize, mu: f64) -> f64 {
    if c == n {
        return f64::INFINITY;
    }
    // rate at or below the mean; comparing rates keeps the full dataset exactly at q = 1
    if c as f64 / n as f64 <= mu {
        return 1.0;
    }
    let q = c as f64 * (1.0 - mu) / (mu * (n - c) as f64);
    q.max(1.0)
}

/// Log-likelihood ratio at a given `q`. Finite `q` only.
pub fn log_likelihood_ratio(q: f64, n_positive: usize, n_subset: usize, global_mean: f64) -> f64 {
    n_positive as f64 * q.ln() - n_subset as f64 * (1.0 - global_mean + q * global_mean).ln()
}

pub fn bernoulli_score(n_positive: usize, n_subset: usize, global_mean: f64) -> Result<ScorePanel> {
    check_inputs(n_positive, n_subset, global_mean)?;
    Ok(score_unchecked(n_positive, n_subset, global_mean))
}

/// Score for counts already known to be valid; zero for an empty subset.
pub(crate) fn score_unchecked(c: usize, n: usize, mu: f64) -> ScorePanel {
    if n == 0 {
        return ScorePanel::empty(mu);
    }
    let q = optimal_q_unchecked(c, n, mu);
    let score = if q.is_infinite() {
        -(n as f64) * mu.ln()
    } else if q == 1.0 {
        0.0
    } else {
        log_likelihood_ratio(q, c, n, mu).max(0.0)
    };
    ScorePanel {
        score,
        q_mle: q,
        n_subset: n,
        n_positive: c,
        global_mean: mu,
        subset_mean: c as f64 / n as f64,
    }
}

/// Score only, for inner loops.
#[inline]
pub(crate) fn score_value(c: usize, n: usize, mu: f64) -> f64 {
    if n == 0 || (c as f64) <= mu * n as f64 {
        return 0.0;
    }
    score_unchecked(c, n, mu).score
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectMeasures {
    pub odds_ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Empirical p-value, once a null distribution has been consulted.
    pub p_value: Option<f64>,
    /// True when `p_value` equals the smallest attainable value `1 / (R + 1)`.
    pub p_at_floor: bool,
    pub subset_rate: f64,
    pub complement_rate: f64,
    /// Whether the +0.5 zero-cell correction was applied.
    pub corrected: bool,
}

/// Odds ratio of the 2x2 table (subset positives `a`, subset negatives `b`,
/// complement positives `c`, complement negatives `d`) with a Woolf 95%
/// interval. A zero in any cell adds 0.5 to all four.
pub fn odds_ratio(a: usize, b: usize, c: usize, d: usize) -> Result<EffectMeasures> {
    if a + b == 0 {
        return Err(Error::contract("odds ratio of an empty subset"));
    }
    if c + d == 0 {
        return Err(Error::contract("odds ratio against an empty complement"));
    }
    let corrected = a == 0 || b == 0 || c == 0 || d == 0;
    let shift = if corrected { 0.5 } else { 0.0 };
    let (fa, fb, fc, fd) = (a as f64 + shift, b as f64 + shift, c as f64 + shift, d as f64 + shift);
    let or = (fa / fb) / (fc / fd);
    let se = (1.0 / fa + 1.0 / fb + 1.0 / fc + 1.0 / fd).sqrt();
    let log_or = or.ln();
    Ok(EffectMeasures {
        odds_ratio: or,
        ci_low: (log_or - Z_95 * se).exp(),
        ci_high: (log_or + Z_95 * se).exp(),
        p_value: None,
        p_at_floor: false,
        subset_rate: a as f64 / (a + b) as f64,
        complement_rate: c as f64 / (c + d) as f64,
        corrected,
    })
}

/// Odds ratio of a subset with `(n_subset, n_positive)` against the rest of a
/// table with `(n_total, total_positive)`.
pub fn subset_odds_ratio(
    n_subset: usize,
    n_positive: usize,
    n_total: usize,
    total_positive: usize,
) -> Result<EffectMeasures> {
    if n_subset > n_total || n_positive > total_positive || n_positive > n_subset {
        return Err(Error::contract("subset counts exceed table counts"));
    }
    let a = n_positive;
    let b = n_subset - n_positive;
    let c = total_positive - n_positive;
    let d = (n_total - n_subset) - c;
    odds_ratio(a, b, c, d)
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
