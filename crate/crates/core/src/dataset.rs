//! Categorical tables with a binary outcome.
//!
//! Category values are stored as dense per-feature indices; the labels only
//! live in the [`Schema`]. Columns are stored feature-major because every
//! hot loop in the scan walks one or two features across all records.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named categorical feature and its ordered category labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub categories: Vec<String>,
}

impl Feature {
    pub fn new<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Feature {
            name: name.into(),
            categories: categories.into_iter().map(Into::into).collect(),
        }
    }

    pub fn cardinality(&self) -> usize {
        self.categories.len()
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    features: Vec<Feature>,
}

impl Schema {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        let mut names = HashSet::new();
        for feature in &features {
            if !names.insert(feature.name.as_str()) {
                return Err(Error::contract(format!("duplicate feature name `{}`", feature.name)));
            }
            if feature.categories.is_empty() {
                return Err(Error::contract(format!("feature `{}` has no categories", feature.name)));
            }
            let mut labels = HashSet::new();
            for label in &feature.categories {
                if !labels.insert(label.as_str()) {
                    return Err(Error::contract(format!(
                        "duplicate category `{label}` in feature `{}`",
                        feature.name
                    )));
                }
            }
        }
        Ok(Schema { features })
    }

    /// Schema with anonymous features `f0, f1, ...` and categories `0, 1, ...`.
    pub fn from_cardinalities(cardinalities: &[usize]) -> Result<Self> {
        let features = cardinalities
            .iter()
            .enumerate()
            .map(|(z, &h)| Feature::new(format!("f{z}"), (0..h).map(|v| v.to_string())))
            .collect();
        Schema::new(features)
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> &Feature {
        &self.features[index]
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn cardinality(&self, feature: usize) -> usize {
        self.features[feature].cardinality()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.features.iter().map(Feature::cardinality).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }
}

/// Immutable table of categorical records plus a binary outcome per record.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    columns: Vec<Vec<u32>>,
    outcomes: Vec<bool>,
    n_positive: usize,
    global_mean: f64,
}

impl Dataset {
    /// Builds a dataset from row-major category indices.
    pub fn from_rows(schema: Schema, rows: &[Vec<usize>], outcomes: Vec<bool>) -> Result<Self> {
        if rows.len() != outcomes.len() {
            return Err(Error::contract(format!(
                "{} rows but {} outcomes",
                rows.len(),
                outcomes.len()
            )));
        }
        let m = schema.n_features();
        let mut columns = vec![Vec::with_capacity(rows.len()); m];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::contract(format!(
                    "row {i} has {} values, schema has {m} features",
                    row.len()
                )));
            }
            for (z, &v) in row.iter().enumerate() {
                columns[z].push(v as u32);
            }
        }
        Dataset::from_columns(schema, columns, outcomes)
    }

    /// Builds a dataset from feature-major category indices.
    pub fn from_columns(schema: Schema, columns: Vec<Vec<u32>>, outcomes: Vec<bool>) -> Result<Self> {
        let n = outcomes.len();
        if n == 0 {
            return Err(Error::contract("dataset has no records"));
        }
        if columns.len() != schema.n_features() {
            return Err(Error::contract(format!(
                "{} columns for {} features",
                columns.len(),
                schema.n_features()
            )));
        }
        for (z, column) in columns.iter().enumerate() {
            if column.len() != n {
                return Err(Error::contract(format!(
                    "column {z} has {} values, expected {n}",
                    column.len()
                )));
            }
            let h = schema.cardinality(z) as u32;
            if let Some(i) = column.iter().position(|&v| v >= h) {
                return Err(Error::contract(format!(
                    "record {i}: value index {} out of range for feature `{}` (cardinality {h})",
                    column[i],
                    schema.feature(z).name
                )));
            }
        }
        let n_positive = outcomes.iter().filter(|&&y| y).count();
        Ok(Dataset {
            schema,
            columns,
            outcomes,
            n_positive,
            global_mean: n_positive as f64 / n as f64,
        })
    }

    /// Same records and features with a different outcome vector.
    pub fn with_outcomes(&self, outcomes: Vec<bool>) -> Result<Self> {
        Dataset::from_columns(self.schema.clone(), self.columns.clone(), outcomes)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, feature: usize) -> &[u32] {
        &self.columns[feature]
    }

    pub fn columns(&self) -> &[Vec<u32>] {
        &self.columns
    }

    pub fn outcomes(&self) -> &[bool] {
        &self.outcomes
    }

    pub fn value(&self, record: usize, feature: usize) -> usize {
        self.columns[feature][record] as usize
    }

    pub fn n_positive(&self) -> usize {
        self.n_positive
    }

    /// Outcome mean over all records.
    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    /// Errors when the outcome is constant.
    pub fn ensure_nondegenerate(&self) -> Result<()> {
        if self.n_positive == 0 || self.n_positive == self.len() {
            return Err(Error::Degenerate(format!(
                "{} of {} records are positive; the scan statistic needs both outcomes",
                self.n_positive,
                self.len()
            )));
        }
        Ok(())
    }

    /// (records, positives) for each category of `feature` over the whole table.
    pub fn marginal_counts(&self, feature: usize) -> Vec<(usize, usize)> {
        let mut counts = vec![(0usize, 0usize); self.schema.cardinality(feature)];
        for (&v, &y) in self.columns[feature].iter().zip(&self.outcomes) {
            let c = &mut counts[v as usize];
            c.0 += 1;
            c.1 += y as usize;
        }
        counts
    }
}
