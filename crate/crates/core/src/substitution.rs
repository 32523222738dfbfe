//! Cross-substitution: replace anomalous feature values with values from the
//! complement and watch the subset lose its anomalousness.

use std::collections::{BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Schema};
use crate::descriptor::SubsetDescriptor;
use crate::error::{Error, Result};
use crate::relevance::RelevanceEntry;
use crate::scan::{self, ScanResult};
use crate::scoring::{self, EffectMeasures, ScorePanel};
use crate::significance::{self, BootstrapConfig, NullDistribution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionCandidate {
    pub feature: String,
    pub feature_index: usize,
    pub from_values: Vec<String>,
    pub from_indices: Vec<usize>,
    pub to_value: String,
    pub to_index: usize,
    pub resulting_descriptor: SubsetDescriptor,
}

impl SubstitutionCandidate {
    fn build(descriptor: &SubsetDescriptor, schema: &Schema, z: usize, from: Vec<usize>, to: usize) -> Self {
        let feature = schema.feature(z);
        let mut values: BTreeSet<usize> = descriptor.get(z).cloned().unwrap_or_default();
        for v in &from {
            values.remove(v);
        }
        values.insert(to);
        let mut resulting_descriptor = descriptor.clone();
        resulting_descriptor.constrain(z, values);
        SubstitutionCandidate {
            feature: feature.name.clone(),
            feature_index: z,
            from_values: from.iter().map(|&v| feature.categories[v].clone()).collect(),
            from_indices: from,
            to_value: feature.categories[to].clone(),
            to_index: to,
            resulting_descriptor,
        }
    }

    /// `[a, b -> c]`
    pub fn label(&self) -> String {
        format!("{}: [{} -> {}]", self.feature, self.from_values.join(", "), self.to_value)
    }
}

/// All single swaps `[v -> v']` and, for features with two or more anomalous
/// values, every collapse `[(all values) -> v']`. Ordered by feature, then
/// from-values (singles before the collapse), then to-value.
pub fn enumerate_substitutions(descriptor: &SubsetDescriptor, schema: &Schema) -> Result<Vec<SubstitutionCandidate>> {
    descriptor.validate(schema)?;
    let mut out = Vec::new();
    for (&z, values) in descriptor.constraints() {
        let complement: Vec<usize> = (0..schema.cardinality(z)).filter(|v| !values.contains(v)).collect();
        if complement.is_empty() {
            continue;
        }
        for &v in values {
            for &to in &complement {
                out.push(SubstitutionCandidate::build(descriptor, schema, z, vec![v], to));
            }
        }
        if values.len() >= 2 {
            let all: Vec<usize> = values.iter().copied().collect();
            for &to in &complement {
                out.push(SubstitutionCandidate::build(descriptor, schema, z, all.clone(), to));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionOutcome {
    pub candidate: SubstitutionCandidate,
    pub old_score: f64,
    pub new_score: f64,
    pub old_or: Option<f64>,
    pub new_or: Option<f64>,
    pub new_panel: ScorePanel,
    pub new_effects: Option<EffectMeasures>,
    /// `None` for an empty subset.
    pub new_p: Option<f64>,
    pub p_at_floor: bool,
    pub significant: bool,
    /// The substituted descriptor matches no record.
    pub empty: bool,
}

/// Rescores one candidate against the original scan result.
pub fn evaluate_substitution(
    dataset: &Dataset,
    original: &ScanResult,
    candidate: &SubstitutionCandidate,
    null: &NullDistribution,
    alpha: f64,
) -> Result<SubstitutionOutcome> {
    let (n, c) = candidate.resulting_descriptor.counts(dataset)?;
    let base = SubstitutionOutcome {
        candidate: candidate.clone(),
        old_score: original.panel.score,
        new_score: 0.0,
        old_or: original.effects.map(|e| e.odds_ratio),
        new_or: None,
        new_panel: ScorePanel::empty(dataset.global_mean()),
        new_effects: None,
        new_p: None,
        p_at_floor: false,
        significant: false,
        empty: true,
    };
    if n == 0 {
        return Ok(base);
    }
    let panel = scoring::score_unchecked(c, n, dataset.global_mean());
    let p = null.p_value(panel.score)?;
    let effects = scan::effects_for(dataset, n, c)?.map(|mut e| {
        e.p_value = Some(p.value);
        e.p_at_floor = p.at_floor;
        e
    });
    Ok(SubstitutionOutcome {
        new_score: panel.score,
        new_or: effects.map(|e| e.odds_ratio),
        new_panel: panel,
        new_effects: effects,
        new_p: Some(p.value),
        p_at_floor: p.at_floor,
        significant: p.value <= alpha,
        empty: false,
        ..base
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha {alpha} not in (0, 1)")));
    }
    Ok(())
}

/// Best (smallest) relevance rank among a candidate's from-values.
fn candidate_rank(candidate: &SubstitutionCandidate, ranking: &[RelevanceEntry]) -> usize {
    candidate
        .from_indices
        .iter()
        .filter_map(|&v| {
            ranking
                .iter()
                .find(|e| e.feature_index == candidate.feature_index && e.value_index == v)
                .map(|e| e.rank)
        })
        .min()
        .unwrap_or(usize::MAX)
}

/// Evaluates every candidate independently against the original descriptor,
/// sharing one null distribution. Ordered by the relevance rank of the
/// substituted value, then enumeration order.
pub fn sweep_with_null(
    dataset: &Dataset,
    result: &ScanResult,
    ranking: &[RelevanceEntry],
    alpha: f64,
    null: &NullDistribution,
) -> Result<Vec<SubstitutionOutcome>> {
    check_alpha(alpha)?;
    let mut candidates = enumerate_substitutions(&result.descriptor, dataset.schema())?;
    candidates.sort_by_key(|c| candidate_rank(c, ranking));
    candidates
        .par_iter()
        .map(|c| evaluate_substitution(dataset, result, c, null, alpha))
        .collect()
}

pub fn single_substitution_sweep(
    dataset: &Dataset,
    result: &ScanResult,
    ranking: &[RelevanceEntry],
    alpha: f64,
    bootstrap: &BootstrapConfig,
) -> Result<Vec<SubstitutionOutcome>> {
    let null = significance::null_distribution(dataset, bootstrap)?;
    sweep_with_null(dataset, result, ranking, alpha, &null)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum StoppingRule {
    /// Stop once the empirical p-value exceeds this level.
    PValueAbove(f64),
    /// Stop once the score is at or below this bound.
    ScoreAtMost(f64),
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule::PValueAbove(0.05)
    }
}

impl StoppingRule {
    fn fires(&self, score: f64, p_value: f64) -> bool {
        match *self {
            StoppingRule::PValueAbove(alpha) => p_value > alpha,
            StoppingRule::ScoreAtMost(bound) => score <= bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retention {
    /// Keep a substitution only if it strictly lowers the score.
    #[default]
    ScoreDecreasing,
    /// Keep every substitution that leaves a nonempty subset.
    Unconditional,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GreedyConfig {
    pub stopping: StoppingRule,
    pub retention: Retention,
}

/// One attempted substitution of the greedy search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub feature: String,
    pub from_value: String,
    pub to_value: String,
    pub score_before: f64,
    pub score_after: f64,
    pub odds_ratio: Option<f64>,
    pub p_value: Option<f64>,
    pub retained: bool,
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyOutcome {
    pub descriptor: SubsetDescriptor,
    pub panel: ScorePanel,
    pub effects: Option<EffectMeasures>,
    pub p_value: f64,
    pub p_at_floor: bool,
    /// Every attempt in order, retained or not.
    pub trace: Vec<GreedyStep>,
    /// Whether the stopping rule fired.
    pub denormalized: bool,
}

impl GreedyOutcome {
    pub fn applied(&self) -> impl Iterator<Item = &GreedyStep> {
        self.trace.iter().filter(|s| s.retained)
    }
}

/// Sequential cross-substitution. Features are dequeued in relevance order;
/// each selected value of the feature is tried against the values outside
/// the original descriptor, and substitutions accumulate in the working
/// descriptor according to `config.retention`. Stops as soon as the stopping
/// rule fires or the queue is exhausted.
pub fn greedy_with_null(
    dataset: &Dataset,
    result: &ScanResult,
    ranking: &[RelevanceEntry],
    config: &GreedyConfig,
    null: &NullDistribution,
) -> Result<GreedyOutcome> {
    if let StoppingRule::PValueAbove(alpha) = config.stopping {
        check_alpha(alpha)?;
    }
    let schema = dataset.schema();
    result.descriptor.validate(schema)?;
    let mu = dataset.global_mean();

    let mut descriptor = result.descriptor.clone();
    let mut panel = result.panel;
    let mut p = null.p_value(panel.score)?;
    let mut trace = Vec::new();
    let mut denormalized = config.stopping.fires(panel.score, p.value);

    let mut queue: VecDeque<usize> = VecDeque::new();
    for e in ranking {
        if !queue.contains(&e.feature_index) {
            queue.push_back(e.feature_index);
        }
    }

    'queue: while !denormalized {
        let Some(z) = queue.pop_front() else { break };
        let Some(original) = result.descriptor.get(z) else { continue };
        let feature = schema.feature(z);
        let complement: Vec<usize> = (0..feature.cardinality()).filter(|v| !original.contains(v)).collect();
        let selected: Vec<usize> = ranking
            .iter()
            .filter(|e| e.feature_index == z)
            .map(|e| e.value_index)
            .collect();

        for v in selected {
            for &to in &complement {
                let current = descriptor.get(z).cloned().unwrap_or_default();
                if !current.contains(&v) {
                    break;
                }
                if current.contains(&to) {
                    continue;
                }
                let mut values = current;
                values.remove(&v);
                values.insert(to);
                let mut trial = descriptor.clone();
                trial.constrain(z, values);

                let (n, c) = trial.counts(dataset)?;
                let mut step = GreedyStep {
                    feature: feature.name.clone(),
                    from_value: feature.categories[v].clone(),
                    to_value: feature.categories[to].clone(),
                    score_before: panel.score,
                    score_after: 0.0,
                    odds_ratio: None,
                    p_value: None,
                    retained: false,
                    empty: n == 0,
                };
                if n == 0 {
                    trace.push(step);
                    continue;
                }
                let trial_panel = scoring::score_unchecked(c, n, mu);
                let trial_p = null.p_value(trial_panel.score)?;
                step.score_after = trial_panel.score;
                step.p_value = Some(trial_p.value);
                step.odds_ratio = scan::effects_for(dataset, n, c)?.map(|e| e.odds_ratio);
                step.retained = match config.retention {
                    Retention::ScoreDecreasing => trial_panel.score < panel.score,
                    Retention::Unconditional => true,
                };
                let retained = step.retained;
                trace.push(step);
                if retained {
                    descriptor = trial;
                    panel = trial_panel;
                    p = trial_p;
                    if config.stopping.fires(panel.score, p.value) {
                        denormalized = true;
                        break 'queue;
                    }
                }
            }
        }
    }

    let effects = scan::effects_for(dataset, panel.n_subset, panel.n_positive)?.map(|mut e| {
        e.p_value = Some(p.value);
        e.p_at_floor = p.at_floor;
        e
    });
    Ok(GreedyOutcome {
        descriptor,
        panel,
        effects,
        p_value: p.value,
        p_at_floor: p.at_floor,
        trace,
        denormalized,
    })
}

pub fn cross_substitute_greedy(
    dataset: &Dataset,
    result: &ScanResult,
    ranking: &[RelevanceEntry],
    config: &GreedyConfig,
    bootstrap: &BootstrapConfig,
) -> Result<GreedyOutcome> {
    let null = significance::null_distribution(dataset, bootstrap)?;
    greedy_with_null(dataset, result, ranking, config, &null)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Feature;

    #[test]
    fn binary_feature_single_swap() {
        let schema = Schema::new(vec![Feature::new("g", ["F", "M"])]).unwrap();
        let d = SubsetDescriptor::from_constraints([(0, vec![0])]);
        let cands = enumerate_substitutions(&d, &schema).unwrap();
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].label(), "g: [F -> M]");
        assert_eq!(cands[0].resulting_descriptor, SubsetDescriptor::from_constraints([(0, vec![1])]));
    }

    #[test]
    fn full_feature_contributes_nothing() {
        let schema = Schema::new(vec![Feature::new("g", ["F", "M"])]).unwrap();
        let d = SubsetDescriptor::from_constraints([(0, vec![0, 1])]);
        assert!(enumerate_substitutions(&d, &schema).unwrap().is_empty());
    }

    #[test]
    fn stopping_rules() {
        assert!(StoppingRule::PValueAbove(0.05).fires(10.0, 0.2));
        assert!(!StoppingRule::PValueAbove(0.05).fires(10.0, 0.05));
        assert!(StoppingRule::ScoreAtMost(3.0).fires(3.0, 0.01));
    }
}
