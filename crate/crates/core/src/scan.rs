//! Multidimensional subset scanning by coordinate ascent.
//!
//! Each restart starts from a random value subset on every feature and then
//! sweeps the features. A feature step drops that feature's constraint,
//! aggregates `(records, positives)` per category over the records that pass
//! every other constraint, and keeps the best-scoring prefix of the categories
//! sorted by positive rate. For the Bernoulli score with a constant baseline
//! that prefix is optimal over all value subsets of the feature, so one step
//! costs a sort instead of an enumeration.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::descriptor::SubsetDescriptor;
use crate::error::{Error, Result};
use crate::scoring::{self, EffectMeasures, ScorePanel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureOrder {
    #[default]
    Fixed,
    /// One random permutation per restart.
    Shuffled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub n_restarts: usize,
    pub max_passes: usize,
    pub seed: u64,
    pub feature_order: FeatureOrder,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            n_restarts: 10,
            max_passes: 20,
            seed: 0,
            feature_order: FeatureOrder::Fixed,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_restarts == 0 {
            return Err(Error::config("n_restarts must be at least 1"));
        }
        if self.max_passes == 0 {
            return Err(Error::config("max_passes must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub descriptor: SubsetDescriptor,
    pub panel: ScorePanel,
    /// `None` when the subset covers every record and has no complement.
    pub effects: Option<EffectMeasures>,
    pub restart_index: usize,
}

impl ScanResult {
    /// Scores `descriptor` against `dataset` and attaches effect measures.
    pub fn evaluate(dataset: &Dataset, descriptor: SubsetDescriptor, restart_index: usize) -> Result<Self> {
        let (n, c) = descriptor.counts(dataset)?;
        let panel = scoring::score_unchecked(c, n, dataset.global_mean());
        let effects = effects_for(dataset, n, c)?;
        Ok(ScanResult {
            descriptor,
            panel,
            effects,
            restart_index,
        })
    }
}

pub(crate) fn effects_for(dataset: &Dataset, n: usize, c: usize) -> Result<Option<EffectMeasures>> {
    if n == 0 || n == dataset.len() {
        return Ok(None);
    }
    scoring::subset_odds_ratio(n, c, dataset.len(), dataset.n_positive()).map(Some)
}

/// One coordinate step, recorded for diagnostics and invariant checks.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub restart: usize,
    pub pass: usize,
    pub feature: usize,
    /// `(records, positives)` per category among records passing the other constraints.
    pub category_counts: Vec<(usize, usize)>,
    pub global_mean: f64,
    pub score_before: f64,
    pub score_after: f64,
    pub adopted: Vec<usize>,
}

pub fn scan(dataset: &Dataset, config: &ScanConfig) -> Result<ScanResult> {
    scan_impl(dataset, config, false).map(|(r, _)| r)
}

/// Like [`scan`], also returning every feature step of every restart.
pub fn scan_with_trace(dataset: &Dataset, config: &ScanConfig) -> Result<(ScanResult, Vec<StepRecord>)> {
    scan_impl(dataset, config, true)
}

fn scan_impl(dataset: &Dataset, config: &ScanConfig, trace: bool) -> Result<(ScanResult, Vec<StepRecord>)> {
    config.validate()?;
    dataset.ensure_nondegenerate()?;

    let outcomes: Vec<_> = (0..config.n_restarts)
        .into_par_iter()
        .map(|r| run_restart(dataset, config, r, trace))
        .collect();

    let mut best: Option<(f64, usize, Vec<Vec<bool>>)> = None;
    let mut steps = Vec::new();
    for (r, (score, allowed, restart_steps)) in outcomes.into_iter().enumerate() {
        steps.extend(restart_steps);
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, r, allowed));
        }
    }
    let (_, restart_index, allowed) = best.expect("n_restarts >= 1");
    let descriptor = descriptor_from_tables(&allowed).normalized(dataset.schema());
    let result = ScanResult::evaluate(dataset, descriptor, restart_index)?;
    Ok((result, steps))
}

fn descriptor_from_tables(allowed: &[Vec<bool>]) -> SubsetDescriptor {
    SubsetDescriptor::from_constraints(allowed.iter().enumerate().map(|(z, table)| {
        (
            z,
            table
                .iter()
                .enumerate()
                .filter_map(|(v, &a)| a.then_some(v))
                .collect::<Vec<_>>(),
        )
    }))
}

/// RNG for restart `r`: shared seed, one ChaCha stream per restart.
fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Each category kept with probability 1/2; empty draws are redrawn.
fn random_subset(rng: &mut impl Rng, cardinality: usize) -> Vec<bool> {
    loop {
        let table: Vec<bool> = (0..cardinality).map(|_| rng.gen_bool(0.5)).collect();
        if table.iter().any(|&a| a) {
            return table;
        }
    }
}

fn run_restart(
    dataset: &Dataset,
    config: &ScanConfig,
    restart: usize,
    trace: bool,
) -> (f64, Vec<Vec<bool>>, Vec<StepRecord>) {
    let mut rng = restart_rng(config.seed, restart);
    let schema = dataset.schema();
    let m = dataset.n_features();
    let n = dataset.len();
    let mu = dataset.global_mean();
    let outcomes = dataset.outcomes();

    let mut allowed: Vec<Vec<bool>> = (0..m).map(|z| random_subset(&mut rng, schema.cardinality(z))).collect();
    let mut order: Vec<usize> = (0..m).collect();
    if config.feature_order == FeatureOrder::Shuffled {
        order.shuffle(&mut rng);
    }

    // number of constraints each record currently fails
    let mut violations = vec![0u32; n];
    for (z, table) in allowed.iter().enumerate() {
        for (viol, &v) in violations.iter_mut().zip(dataset.column(z)) {
            *viol += !table[v as usize] as u32;
        }
    }
    let mut current = {
        let (mut cn, mut cc) = (0, 0);
        for (&viol, &y) in violations.iter().zip(outcomes) {
            if viol == 0 {
                cn += 1;
                cc += y as usize;
            }
        }
        scoring::score_value(cc, cn, mu)
    };

    let mut steps = Vec::new();
    for pass in 0..config.max_passes {
        let mut changed = false;
        for &z in &order {
            let column = dataset.column(z);
            let table = &allowed[z];
            let mut counts = vec![(0usize, 0usize); schema.cardinality(z)];
            for i in 0..n {
                let v = column[i] as usize;
                let others = violations[i] - !table[v] as u32;
                if others == 0 {
                    counts[v].0 += 1;
                    counts[v].1 += outcomes[i] as usize;
                }
            }
            let (adopted, best) = best_prefix(&counts, mu);
            debug_assert!(best + 1e-9 >= current, "ascent decreased: {current} -> {best}");

            let mut new_table = vec![false; counts.len()];
            for &v in &adopted {
                new_table[v] = true;
            }
            if trace {
                steps.push(StepRecord {
                    restart,
                    pass,
                    feature: z,
                    category_counts: counts,
                    global_mean: mu,
                    score_before: current,
                    score_after: best,
                    adopted: adopted.clone(),
                });
            }
            if new_table != allowed[z] {
                changed = true;
                for (viol, &v) in violations.iter_mut().zip(column) {
                    let v = v as usize;
                    *viol = *viol - !allowed[z][v] as u32 + !new_table[v] as u32;
                }
                allowed[z] = new_table;
            }
            current = best;
        }
        if !changed {
            break;
        }
    }
    (current, allowed, steps)
}

/// Orders categories by positive rate, highest first. Ties go to the larger
/// category, then the lower index; empty categories sort last.
pub(crate) fn priority_order(counts: &[(usize, usize)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&i, &j| {
        let (ni, ci) = counts[i];
        let (nj, cj) = counts[j];
        match (ni == 0, nj == 0) {
            (true, true) => return i.cmp(&j),
            (true, false) => return Ordering::Greater,
            (false, true) => return Ordering::Less,
            _ => {}
        }
        // ci/ni vs cj/nj without division
        let lhs = ci as u128 * nj as u128;
        let rhs = cj as u128 * ni as u128;
        rhs.cmp(&lhs).then(nj.cmp(&ni)).then(i.cmp(&j))
    });
    order
}

/// Best prefix of the priority order: `(categories, score)`. Score ties keep
/// the shorter prefix.
pub(crate) fn best_prefix(counts: &[(usize, usize)], mu: f64) -> (Vec<usize>, f64) {
    let order = priority_order(counts);
    let (mut n, mut c) = (0usize, 0usize);
    let mut best_len = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (k, &v) in order.iter().enumerate() {
        n += counts[v].0;
        c += counts[v].1;
        let s = scoring::score_value(c, n, mu);
        if s > best_score {
            best_score = s;
            best_len = k + 1;
        }
    }
    (order[..best_len].to_vec(), best_score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Feature, Schema};

    #[test]
    fn priority_ties() {
        // rates: 0.5, 0.5 (larger), 1.0, empty, 0.0
        let counts = [(2, 1), (4, 2), (1, 1), (0, 0), (3, 0)];
        assert_eq!(priority_order(&counts), vec![2, 1, 0, 4, 3]);
    }

    #[test]
    fn prefix_ties_prefer_fewer_categories() {
        // the zero-count category adds nothing, so the shorter prefix wins
        let (adopted, _) = best_prefix(&[(10, 9), (0, 0)], 0.2);
        assert_eq!(adopted, vec![0]);
        // all-zero scores keep only the first category
        let (adopted, s) = best_prefix(&[(10, 0), (10, 0)], 0.2);
        assert_eq!((adopted, s), (vec![0], 0.0));
    }

    #[test]
    fn rejects_invalid_config_and_degenerate_data() {
        let schema = Schema::new(vec![Feature::new("a", ["x", "y"])]).unwrap();
        let ds = Dataset::from_rows(schema.clone(), &[vec![0], vec![1]], vec![true, false]).unwrap();
        let bad = ScanConfig {
            n_restarts: 0,
            ..ScanConfig::default()
        };
        assert!(matches!(scan(&ds, &bad), Err(Error::Config(_))));
        let flat = Dataset::from_rows(schema, &[vec![0], vec![1]], vec![false, false]).unwrap();
        assert!(scan(&flat, &ScanConfig::default()).unwrap_err().is_degenerate());
    }

    #[test]
    fn finds_single_hot_value() {
        let schema = Schema::new(vec![
            Feature::new("a", ["x", "y", "z"]),
            Feature::new("b", ["p", "q"]),
        ])
        .unwrap();
        let rows: Vec<Vec<usize>> = (0..60).map(|i| vec![i % 3, (i / 3) % 2]).collect();
        let outcomes = rows.iter().map(|r| r[0] == 1).collect();
        let ds = Dataset::from_rows(schema, &rows, outcomes).unwrap();
        let result = scan(&ds, &ScanConfig::default()).unwrap();
        assert_eq!(result.descriptor, SubsetDescriptor::from_constraints([(0, vec![1])]));
        assert_eq!(result.panel.n_subset, 20);
        assert_eq!(result.panel.n_positive, 20);
    }
}
