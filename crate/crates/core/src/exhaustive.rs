//! Brute-force global maximum over every descriptor, for small tables.

use crate::dataset::Dataset;
use crate::descriptor::SubsetDescriptor;
use crate::error::{Error, Result};
use crate::scan::ScanResult;
use crate::scoring;

/// Number of descriptors the enumeration visits: `prod_z 2^{H_z}` (every
/// nonempty value subset plus "unconstrained" per feature). Saturates.
pub fn enumeration_size(cardinalities: &[usize]) -> u128 {
    cardinalities.iter().fold(1u128, |acc, &h| {
        let options = if h >= 127 { u128::MAX } else { 1u128 << h };
        acc.saturating_mul(options)
    })
}

/// Enumerates all descriptors and returns the highest-scoring one. Score ties
/// go to the descriptor with fewer constrained features, then to the smaller
/// descriptor in its derived ordering.
pub fn exhaustive_scan(dataset: &Dataset, limit: u128) -> Result<ScanResult> {
    dataset.ensure_nondegenerate()?;
    let cards = dataset.schema().cardinalities();
    let needed = enumeration_size(&cards);
    if needed > limit {
        return Err(Error::BudgetExceeded { needed, limit });
    }

    // joint (records, positives) table over the full category grid, first feature slowest
    let cells: usize = cards.iter().product();
    let mut grid = vec![(0usize, 0usize); cells];
    for i in 0..dataset.len() {
        let mut idx = 0;
        for (z, &h) in cards.iter().enumerate() {
            idx = idx * h + dataset.value(i, z);
        }
        grid[idx].0 += 1;
        grid[idx].1 += dataset.outcomes()[i] as usize;
    }

    let mut search = Search {
        cards: &cards,
        mu: dataset.global_mean(),
        choice: vec![None; cards.len()],
        best: None,
    };
    search.descend(0, &grid);
    let (_, descriptor) = search.best.expect("at least the empty descriptor is visited");
    ScanResult::evaluate(dataset, descriptor, 0)
}

struct Search<'a> {
    cards: &'a [usize],
    mu: f64,
    /// Value mask per feature, `None` for unconstrained.
    choice: Vec<Option<u128>>,
    best: Option<(f64, SubsetDescriptor)>,
}

impl Search<'_> {
    fn descend(&mut self, z: usize, table: &[(usize, usize)]) {
        if z == self.cards.len() {
            let (n, c) = table[0];
            let score = scoring::score_value(c, n, self.mu);
            self.offer(score);
            return;
        }
        let h = self.cards[z];
        let stride = table.len() / h;
        let collapse = |mask: Option<u128>| -> Vec<(usize, usize)> {
            let mut out = vec![(0usize, 0usize); stride];
            for v in 0..h {
                if mask.is_none_or(|m| (m >> v) & 1 == 1) {
                    for (o, t) in out.iter_mut().zip(&table[v * stride..(v + 1) * stride]) {
                        o.0 += t.0;
                        o.1 += t.1;
                    }
                }
            }
            out
        };

        self.choice[z] = None;
        let reduced = collapse(None);
        self.descend(z + 1, &reduced);

        let full = if h >= 128 { u128::MAX } else { (1u128 << h) - 1 };
        for mask in 1..full {
            self.choice[z] = Some(mask);
            let reduced = collapse(Some(mask));
            self.descend(z + 1, &reduced);
        }
        self.choice[z] = None;
    }

    fn offer(&mut self, score: f64) {
        let better = match &self.best {
            None => true,
            Some((s, _)) if score > *s => true,
            Some((s, _)) if score < *s => false,
            Some((_, d)) => {
                let candidate = self.descriptor();
                (candidate.n_constrained(), &candidate) < (d.n_constrained(), d)
            }
        };
        if better {
            self.best = Some((score, self.descriptor()));
        }
    }

    fn descriptor(&self) -> SubsetDescriptor {
        SubsetDescriptor::from_constraints(self.choice.iter().enumerate().filter_map(|(z, m)| {
            m.map(|mask| (z, (0..self.cards[z]).filter(|&v| (mask >> v) & 1 == 1).collect::<Vec<_>>()))
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Feature, Schema};

    #[test]
    fn single_binary_feature() {
        let schema = Schema::new(vec![Feature::new("a", ["x", "y"])]).unwrap();
        let rows: Vec<Vec<usize>> = (0..20).map(|i| vec![i % 2]).collect();
        let outcomes = (0..20).map(|i| i % 2 == 1 && i < 15).collect();
        let ds = Dataset::from_rows(schema, &rows, outcomes).unwrap();
        let r = exhaustive_scan(&ds, 1 << 10).unwrap();
        assert_eq!(r.descriptor, SubsetDescriptor::from_constraints([(0, vec![1])]));
    }

    #[test]
    fn refuses_over_budget() {
        let schema = Schema::from_cardinalities(&[4, 4]).unwrap();
        let ds = Dataset::from_rows(schema, &[vec![0, 0], vec![1, 1]], vec![true, false]).unwrap();
        assert_eq!(enumeration_size(&[4, 4]), 256);
        assert!(matches!(
            exhaustive_scan(&ds, 255),
            Err(Error::BudgetExceeded { needed: 256, limit: 255 })
        ));
        assert!(exhaustive_scan(&ds, 256).is_ok());
    }
}
