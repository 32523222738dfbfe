//! Empirical p-values from a parametric bootstrap of the scan maximum.
//!
//! Each replicate keeps the features fixed, redraws every outcome as
//! Bernoulli(global mean) and reruns the full scan. The observed score is
//! ranked against the replicate maxima with the usual `(1 + k) / (1 + R)`
//! estimator, so the smallest reachable p-value is `1 / (R + 1)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scan::{self, ScanConfig};

/// Redraws allowed per replicate when the simulated outcomes come out constant.
pub const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub n_replicates: usize,
    pub seed: u64,
    pub scan: ScanConfig,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_replicates: 50,
            seed: 0,
            scan: ScanConfig::default(),
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_replicates == 0 {
            return Err(Error::config("n_replicates must be at least 1"));
        }
        self.scan.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValue {
    pub value: f64,
    /// Replicates scoring at least the observed score.
    pub exceedances: usize,
    pub n_replicates: usize,
    /// No replicate reached the observed score, so `value == 1 / (R + 1)`.
    pub at_floor: bool,
}

/// Maximum scan scores of the null replicates, in replicate order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullDistribution {
    pub scores: Vec<f64>,
}

impl NullDistribution {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::config("null distribution needs at least one replicate"));
        }
        Ok(NullDistribution { scores })
    }

    pub fn n_replicates(&self) -> usize {
        self.scores.len()
    }

    pub fn p_value(&self, observed_score: f64) -> Result<PValue> {
        if observed_score.is_nan() || observed_score < 0.0 {
            return Err(Error::contract(format!(
                "observed score {observed_score} must be non-negative"
            )));
        }
        let exceedances = self.scores.iter().filter(|&&s| s >= observed_score).count();
        let r = self.scores.len();
        Ok(PValue {
            value: (1 + exceedances) as f64 / (1 + r) as f64,
            exceedances,
            n_replicates: r,
            at_floor: exceedances == 0,
        })
    }
}

/// Runs every null replicate once. The result can score any number of subsets
/// of the same dataset.
pub fn null_distribution(dataset: &Dataset, config: &BootstrapConfig) -> Result<NullDistribution> {
    config.validate()?;
    dataset.ensure_nondegenerate()?;
    let scores = (0..config.n_replicates)
        .into_par_iter()
        .map(|r| replicate_score(dataset, config, r))
        .collect::<Result<Vec<_>>>()?;
    NullDistribution::new(scores)
}

pub fn empirical_p_value(
    dataset: &Dataset,
    observed_score: f64,
    config: &BootstrapConfig,
) -> Result<(PValue, NullDistribution)> {
    if observed_score.is_nan() || observed_score < 0.0 {
        return Err(Error::contract(format!(
            "observed score {observed_score} must be non-negative"
        )));
    }
    let null = null_distribution(dataset, config)?;
    Ok((null.p_value(observed_score)?, null))
}

/// Outcomes for replicate `r` and the seed its scan uses.
pub fn null_outcomes(dataset: &Dataset, seed: u64, replicate: usize) -> Result<(Vec<bool>, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    let mu = dataset.global_mean();
    for _ in 0..MAX_REDRAWS {
        let outcomes: Vec<bool> = (0..dataset.len()).map(|_| rng.gen_bool(mu)).collect();
        let positives = outcomes.iter().filter(|&&y| y).count();
        if positives > 0 && positives < outcomes.len() {
            return Ok((outcomes, rng.gen()));
        }
    }
    Err(Error::Degenerate(format!(
        "replicate {replicate} drew constant outcomes {MAX_REDRAWS} times"
    )))
}

fn replicate_score(dataset: &Dataset, config: &BootstrapConfig, replicate: usize) -> Result<f64> {
    let (outcomes, scan_seed) = null_outcomes(dataset, config.seed, replicate)?;
    let null_data = dataset.with_outcomes(outcomes)?;
    let scan_config = ScanConfig {
        seed: scan_seed,
        ..config.scan.clone()
    };
    Ok(scan::scan(&null_data, &scan_config)?.panel.score)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_and_ceiling() {
        let null = NullDistribution::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let top = null.p_value(10.0).unwrap();
        assert_eq!(top.value, 0.2);
        assert!(top.at_floor);
        assert_eq!(null.p_value(0.0).unwrap().value, 1.0);
        assert_eq!(null.p_value(2.0).unwrap().exceedances, 3);
        assert!(null.p_value(-1.0).is_err());
        assert!(null.p_value(f64::NAN).is_err());
    }

    #[test]
    fn fifty_replicates_floor() {
        let null = NullDistribution::new(vec![0.5; 50]).unwrap();
        let p = null.p_value(500.22).unwrap();
        assert_eq!(format!("{:.6}", p.value), "0.019608");
    }

    #[test]
    fn rejects_zero_replicates() {
        let cfg = BootstrapConfig {
            n_replicates: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
