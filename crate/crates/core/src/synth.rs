//! Synthetic cohorts with a planted high-odds subgroup.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Schema};
use crate::descriptor::SubsetDescriptor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_records: usize,
    pub cardinalities: Vec<usize>,
    /// Outcome rate outside the planted subgroup.
    pub base_rate: f64,
    pub planted: SubsetDescriptor,
    /// Odds multiplier inside the planted subgroup; must exceed 1.
    pub odds_multiplier: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub dataset: Dataset,
    pub planted: SubsetDescriptor,
    /// Records that were generated inside the planted subgroup.
    pub members: Vec<usize>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_records == 0 {
            return Err(Error::config("n_records must be positive"));
        }
        if !(self.base_rate > 0.0 && self.base_rate < 1.0) {
            return Err(Error::config(format!("base_rate {} not in (0, 1)", self.base_rate)));
        }
        if self.odds_multiplier.is_nan() || self.odds_multiplier <= 1.0 {
            return Err(Error::config(format!(
                "odds multiplier {} must be greater than 1",
                self.odds_multiplier
            )));
        }
        let p = self.planted_rate();
        if !p.is_finite() || p >= 1.0 {
            return Err(Error::config(format!(
                "planted outcome probability {p} is not below 1"
            )));
        }
        let schema = Schema::from_cardinalities(&self.cardinalities)?;
        self.planted.validate(&schema)
    }

    /// Outcome probability inside the planted subgroup.
    pub fn planted_rate(&self) -> f64 {
        let odds = self.odds_multiplier * self.base_rate / (1.0 - self.base_rate);
        odds / (1.0 + odds)
    }
}

/// Draws features uniformly and independently, then outcomes at the base odds
/// outside the planted subgroup and at `odds_multiplier` times those odds inside.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCohort> {
    spec.validate()?;
    let schema = Schema::from_cardinalities(&spec.cardinalities)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_records;
    let inside = spec.planted_rate();

    let mut rows = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    let mut members = Vec::new();
    for i in 0..n {
        let row: Vec<usize> = spec.cardinalities.iter().map(|&h| rng.gen_range(0..h)).collect();
        let member = spec
            .planted
            .constraints()
            .iter()
            .all(|(&z, vs)| vs.contains(&row[z]));
        let p = if member { inside } else { spec.base_rate };
        outcomes.push(rng.gen_bool(p));
        if member {
            members.push(i);
        }
        rows.push(row);
    }
    let dataset = Dataset::from_rows(schema, &rows, outcomes)?;
    Ok(SyntheticCohort {
        dataset,
        planted: spec.planted.clone(),
        members,
    })
}
