#![allow(dead_code)]

use postscan::{Dataset, Schema, SubsetDescriptor, SyntheticSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform categorical features, outcomes at a constant rate.
pub fn random_dataset(seed: u64, cardinalities: &[usize], n: usize, rate: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let rows: Vec<Vec<usize>> = (0..n)
            .map(|_| cardinalities.iter().map(|&h| rng.gen_range(0..h)).collect())
            .collect();
        let outcomes: Vec<bool> = (0..n).map(|_| rng.gen_bool(rate)).collect();
        let ds = Dataset::from_rows(Schema::from_cardinalities(cardinalities).unwrap(), &rows, outcomes).unwrap();
        if ds.ensure_nondegenerate().is_ok() {
            return ds;
        }
    }
}

/// Random rows with a cell-dependent outcome rate, so scans have structure to find.
pub fn structured_dataset(seed: u64, cardinalities: &[usize], n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rates: Vec<Vec<f64>> = cardinalities
        .iter()
        .map(|&h| (0..h).map(|_| rng.gen_range(0.02..0.4)).collect())
        .collect();
    loop {
        let rows: Vec<Vec<usize>> = (0..n)
            .map(|_| cardinalities.iter().map(|&h| rng.gen_range(0..h)).collect())
            .collect();
        let outcomes: Vec<bool> = rows
            .iter()
            .map(|r| {
                let p = r.iter().enumerate().map(|(z, &v)| rates[z][v]).sum::<f64>() / r.len() as f64;
                rng.gen_bool(p)
            })
            .collect();
        let ds = Dataset::from_rows(Schema::from_cardinalities(cardinalities).unwrap(), &rows, outcomes).unwrap();
        if ds.ensure_nondegenerate().is_ok() {
            return ds;
        }
    }
}

/// Planted-cohort spec used by the recovery and denormalization checks.
pub fn planted_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n_records: 2000,
        cardinalities: vec![2, 2, 2, 2, 2],
        base_rate: 0.05,
        planted: SubsetDescriptor::from_constraints([(0, vec![1]), (1, vec![1])]),
        odds_multiplier: 3.0,
        seed,
    }
}

/// Exact one-sided binomial test: P(X >= k) for X ~ Bin(n, p).
pub fn binomial_upper_tail(k: usize, n: usize, p: f64) -> f64 {
    use statrs::distribution::{Binomial, DiscreteCDF};
    if k == 0 {
        return 1.0;
    }
    let b = Binomial::new(p, n as u64).unwrap();
    b.sf(k as u64 - 1)
}
