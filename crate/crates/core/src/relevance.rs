//! Ranking the feature values of an anomalous subset by how much they drive
//! its anomalousness.
//!
//! For each value `v` in the descriptor, `e_v` is the outcome mean over all
//! records carrying `v` (not only subset members). Two deviations follow:
//! the subset deviation `e_v - e_a` against the subset's expectation and the
//! global deviation `e_v - e_bar` against the dataset mean. Their quotient is
//! the deviation ratio.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scan::ScanResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceExpectation {
    /// Outcome mean of the anomalous subset.
    #[default]
    SubsetMean,
    /// Fixed at 1.0.
    Unity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMode {
    /// Negative ratios first (descending), then non-negative ones (descending),
    /// undefined ratios last.
    #[default]
    DeviationRatio,
    /// Descending global deviation.
    GlobalDeviation,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum Selection {
    #[default]
    All,
    TopK(usize),
    /// Keeps entries whose ranking statistic is strictly above the threshold.
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RelevanceConfig {
    pub reference: ReferenceExpectation,
    pub ranking: RankingMode,
    pub selection: Selection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceEntry {
    pub feature: String,
    pub feature_index: usize,
    pub value: String,
    pub value_index: usize,
    pub e_value: f64,
    pub subset_deviation: f64,
    pub global_deviation: f64,
    /// `None` when the global deviation is exactly zero.
    pub deviation_ratio: Option<f64>,
    pub rank: usize,
}

impl RelevanceEntry {
    fn statistic(&self, mode: RankingMode) -> Option<f64> {
        match mode {
            RankingMode::DeviationRatio => self.deviation_ratio,
            RankingMode::GlobalDeviation => Some(self.global_deviation),
        }
    }
}

/// `(subset deviation, global deviation, ratio)`.
pub fn deviations(e_value: f64, global_mean: f64, reference: f64) -> (f64, f64, Option<f64>) {
    let subset = e_value - reference;
    let global = e_value - global_mean;
    let ratio = (global != 0.0).then(|| subset / global);
    (subset, global, ratio)
}

/// A value to be ranked, with its marginal outcome mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueExpectation {
    pub feature: String,
    pub feature_index: usize,
    pub value: String,
    pub value_index: usize,
    pub e_value: f64,
}

/// Ranks precomputed expectations; ties keep input order.
pub fn rank_values(
    values: Vec<ValueExpectation>,
    global_mean: f64,
    reference: f64,
    config: &RelevanceConfig,
) -> Vec<RelevanceEntry> {
    let mut entries: Vec<RelevanceEntry> = values
        .into_iter()
        .map(|v| {
            let (subset_deviation, global_deviation, deviation_ratio) =
                deviations(v.e_value, global_mean, reference);
            RelevanceEntry {
                feature: v.feature,
                feature_index: v.feature_index,
                value: v.value,
                value_index: v.value_index,
                e_value: v.e_value,
                subset_deviation,
                global_deviation,
                deviation_ratio,
                rank: 0,
            }
        })
        .collect();

    match config.ranking {
        RankingMode::DeviationRatio => entries.sort_by(|a, b| ratio_order(a.deviation_ratio, b.deviation_ratio)),
        RankingMode::GlobalDeviation => {
            entries.sort_by(|a, b| b.global_deviation.total_cmp(&a.global_deviation))
        }
    }
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }

    match config.selection {
        Selection::All => entries,
        Selection::TopK(k) => entries.into_iter().take(k).collect(),
        Selection::Threshold(t) => entries
            .into_iter()
            .filter(|e| e.statistic(config.ranking).is_some_and(|s| s > t))
            .collect(),
    }
}

fn ratio_order(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Greater,
        (Some(_), None) => Ordering::Less,
        (Some(x), Some(y)) => {
            let group = |r: f64| if r < 0.0 { 0 } else { 1 };
            group(x).cmp(&group(y)).then(y.total_cmp(&x))
        }
    }
}

/// One entry per value of every constrained feature, ranked. Values that no
/// record carries get `e_value = global mean` and hence an undefined ratio.
pub fn rank_feature_relevance(
    dataset: &Dataset,
    result: &ScanResult,
    config: &RelevanceConfig,
) -> Result<Vec<RelevanceEntry>> {
    let descriptor = &result.descriptor;
    if descriptor.is_empty() {
        return Err(Error::contract("cannot rank an unconstrained descriptor"));
    }
    descriptor.validate(dataset.schema())?;
    let global_mean = dataset.global_mean();
    let reference = match config.reference {
        ReferenceExpectation::SubsetMean => {
            let (n, c) = descriptor.counts(dataset)?;
            if n == 0 {
                return Err(Error::contract("anomalous subset has no members"));
            }
            c as f64 / n as f64
        }
        ReferenceExpectation::Unity => 1.0,
    };

    let mut values = Vec::new();
    for (&z, vs) in descriptor.constraints() {
        let feature = dataset.schema().feature(z);
        let marginal = dataset.marginal_counts(z);
        for &v in vs {
            let (n, c) = marginal[v];
            let e_value = if n == 0 { global_mean } else { c as f64 / n as f64 };
            values.push(ValueExpectation {
                feature: feature.name.clone(),
                feature_index: z,
                value: feature.categories[v].clone(),
                value_index: v,
                e_value,
            });
        }
    }
    Ok(rank_values(values, global_mean, reference, config))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(name: &str, e: f64) -> ValueExpectation {
        ValueExpectation {
            feature: "f".into(),
            feature_index: 0,
            value: name.into(),
            value_index: 0,
            e_value: e,
        }
    }

    #[test]
    fn medicare_retiree_arithmetic() {
        let (s, g, r) = deviations(0.057, 0.0389, 1.0);
        assert!((s + 0.943).abs() < 1e-12);
        assert!((g - 0.0181).abs() < 1e-12);
        let r = r.unwrap();
        assert!(((r - -52.21) / 52.21).abs() < 0.01, "ratio {r}");
    }

    #[test]
    fn undefined_ratio_ranks_last() {
        let cfg = RelevanceConfig::default();
        let ranked = rank_values(vec![value("flat", 0.1), value("hot", 0.3)], 0.1, 0.5, &cfg);
        assert_eq!(ranked[0].value, "hot");
        assert_eq!(ranked[1].value, "flat");
        assert_eq!(ranked[1].deviation_ratio, None);
        assert_eq!(ranked[1].rank, 2);
    }

    #[test]
    fn global_mode_sorts_by_deviation() {
        let cfg = RelevanceConfig {
            ranking: RankingMode::GlobalDeviation,
            ..Default::default()
        };
        let ranked = rank_values(
            vec![value("a", 0.2), value("b", 0.6), value("c", 0.4)],
            0.1,
            1.0,
            &cfg,
        );
        let names: Vec<_> = ranked.iter().map(|e| e.value.as_str()).collect();
        assert_eq!(names, ["b", "c", "a"]);
    }

    #[test]
    fn selection_rules() {
        let vals = || vec![value("a", 0.2), value("b", 0.6), value("c", 0.4)];
        let top = RelevanceConfig {
            ranking: RankingMode::GlobalDeviation,
            selection: Selection::TopK(2),
            ..Default::default()
        };
        assert_eq!(rank_values(vals(), 0.1, 1.0, &top).len(), 2);
        let thresh = RelevanceConfig {
            ranking: RankingMode::GlobalDeviation,
            selection: Selection::Threshold(0.2),
            ..Default::default()
        };
        let kept = rank_values(vals(), 0.1, 1.0, &thresh);
        let ranks: Vec<_> = kept.iter().map(|e| e.rank).collect();
        assert_eq!(ranks, [1, 2]);
    }
}
