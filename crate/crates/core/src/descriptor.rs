//! Subgroup descriptors: a conjunction over features of disjunctions over
//! category values.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Schema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubsetDescriptor {
    constraints: BTreeMap<usize, BTreeSet<usize>>,
}

/// Label form of one constraint, used in reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledConstraint {
    pub feature: String,
    pub values: Vec<String>,
}

impl SubsetDescriptor {
    /// The unconstrained descriptor; matches every record.
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_constraints<I, V>(constraints: I) -> Self
    where
        I: IntoIterator<Item = (usize, V)>,
        V: IntoIterator<Item = usize>,
    {
        let mut d = Self::new();
        for (feature, values) in constraints {
            d.constraints.insert(feature, values.into_iter().collect());
        }
        d
    }

    /// Replaces the value set of `feature`.
    pub fn constrain(&mut self, feature: usize, values: impl IntoIterator<Item = usize>) -> &mut Self {
        self.constraints.insert(feature, values.into_iter().collect());
        self
    }

    pub fn unconstrain(&mut self, feature: usize) -> Option<BTreeSet<usize>> {
        self.constraints.remove(&feature)
    }

    pub fn get(&self, feature: usize) -> Option<&BTreeSet<usize>> {
        self.constraints.get(&feature)
    }

    pub fn constraints(&self) -> &BTreeMap<usize, BTreeSet<usize>> {
        &self.constraints
    }

    pub fn constrained_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.constraints.keys().copied()
    }

    pub fn n_constrained(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Checks feature and value indices against `schema`; every set must be nonempty.
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        for (&feature, values) in &self.constraints {
            if feature >= schema.n_features() {
                return Err(Error::contract(format!(
                    "feature index {feature} out of range ({} features)",
                    schema.n_features()
                )));
            }
            if values.is_empty() {
                return Err(Error::contract(format!(
                    "empty value set for feature `{}`",
                    schema.feature(feature).name
                )));
            }
            let h = schema.cardinality(feature);
            if let Some(&bad) = values.iter().find(|&&v| v >= h) {
                return Err(Error::contract(format!(
                    "value index {bad} out of range for feature `{}` (cardinality {h})",
                    schema.feature(feature).name
                )));
            }
        }
        Ok(())
    }

    /// Drops constraints whose value set covers the whole feature.
    pub fn normalized(&self, schema: &Schema) -> Self {
        SubsetDescriptor {
            constraints: self
                .constraints
                .iter()
                .filter(|(&f, vs)| vs.len() < schema.cardinality(f))
                .map(|(&f, vs)| (f, vs.clone()))
                .collect(),
        }
    }

    /// Per-feature inclusion tables, `None` for unconstrained features.
    pub(crate) fn allowed_tables(&self, schema: &Schema) -> Vec<Option<Vec<bool>>> {
        (0..schema.n_features())
            .map(|z| {
                self.constraints.get(&z).map(|vs| {
                    let mut table = vec![false; schema.cardinality(z)];
                    for &v in vs {
                        table[v] = true;
                    }
                    table
                })
            })
            .collect()
    }

    pub fn contains(&self, dataset: &Dataset, record: usize) -> bool {
        self.constraints
            .iter()
            .all(|(&z, vs)| vs.contains(&dataset.value(record, z)))
    }

    /// Membership flag for every record.
    pub fn member_mask(&self, dataset: &Dataset) -> Result<Vec<bool>> {
        self.validate(dataset.schema())?;
        let mut mask = vec![true; dataset.len()];
        for (z, table) in self.allowed_tables(dataset.schema()).into_iter().enumerate() {
            if let Some(table) = table {
                for (m, &v) in mask.iter_mut().zip(dataset.column(z)) {
                    *m &= table[v as usize];
                }
            }
        }
        Ok(mask)
    }

    /// Indices of the records matching the descriptor, ascending.
    pub fn membership(&self, dataset: &Dataset) -> Result<Vec<usize>> {
        Ok(self
            .member_mask(dataset)?
            .into_iter()
            .enumerate()
            .filter_map(|(i, m)| m.then_some(i))
            .collect())
    }

    /// (member count, positive members).
    pub fn counts(&self, dataset: &Dataset) -> Result<(usize, usize)> {
        let mask = self.member_mask(dataset)?;
        let mut n = 0;
        let mut c = 0;
        for (&m, &y) in mask.iter().zip(dataset.outcomes()) {
            if m {
                n += 1;
                c += y as usize;
            }
        }
        Ok((n, c))
    }

    pub fn to_labeled(&self, schema: &Schema) -> Vec<LabeledConstraint> {
        self.constraints
            .iter()
            .map(|(&z, vs)| {
                let feature = schema.feature(z);
                LabeledConstraint {
                    feature: feature.name.clone(),
                    values: vs.iter().map(|&v| feature.categories[v].clone()).collect(),
                }
            })
            .collect()
    }

    pub fn from_labeled(constraints: &[LabeledConstraint], schema: &Schema) -> Result<Self> {
        let mut d = Self::new();
        for c in constraints {
            let z = schema
                .feature_index(&c.feature)
                .ok_or_else(|| Error::contract(format!("unknown feature `{}`", c.feature)))?;
            let feature = schema.feature(z);
            let values = c
                .values
                .iter()
                .map(|label| {
                    feature.category_index(label).ok_or_else(|| {
                        Error::contract(format!("unknown value `{label}` for feature `{}`", c.feature))
                    })
                })
                .collect::<Result<BTreeSet<_>>>()?;
            d.constraints.insert(z, values);
        }
        d.validate(schema)?;
        Ok(d)
    }

    pub fn display<'a>(&'a self, schema: &'a Schema) -> impl fmt::Display + 'a {
        DisplayDescriptor { descriptor: self, schema }
    }
}

struct DisplayDescriptor<'a> {
    descriptor: &'a SubsetDescriptor,
    schema: &'a Schema,
}

impl fmt::Display for DisplayDescriptor<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.descriptor.is_empty() {
            return write!(f, "{{all records}}");
        }
        let parts: Vec<String> = self
            .descriptor
            .to_labeled(self.schema)
            .into_iter()
            .map(|c| format!("{}: {}", c.feature, c.values.join(" | ")))
            .collect();
        write!(f, "{{{}}}", parts.join("; "))
    }
}
