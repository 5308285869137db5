//! Shared fixtures for the benchmarks: synthetic designs for the sampler
//! and uniform datasets for the attribution kernels, both fully seeded.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ruleshap::dataset::ColumnKind;
use ruleshap::rulegen::Condition;
use ruleshap::{Dataset, DesignMatrices, Rule};

/// Random design with q Bernoulli rule columns and p centered uniform
/// linear columns; the outcome mixes the first column of each block.
pub fn synthetic_design(seed: u64, n: usize, q: usize, p: usize) -> DesignMatrices {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rule_columns: Vec<Vec<f64>> = (0..q)
        .map(|_| (0..n).map(|_| f64::from(rng.random::<f64>() < 0.4)).collect())
        .collect();
    let center = |mut col: Vec<f64>| {
        let m: f64 = col.iter().sum::<f64>() / col.len() as f64;
        for v in &mut col {
            *v -= m;
        }
        col
    };
    let linear_columns: Vec<Vec<f64>> = (0..p)
        .map(|_| center((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            1.5 * linear_columns[0][i] + 0.8 * rule_columns[0][i] + rng.random_range(-0.5..0.5)
        })
        .collect();
    DesignMatrices::new(rule_columns, linear_columns, center(y), vec![1.0; q]).unwrap()
}

/// Uniform-feature dataset with p continuous columns named x0..x{p-1}.
pub fn uniform_dataset(seed: u64, n: usize, p: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
        .collect();
    let outcome: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let names = (0..p).map(|j| format!("x{j}")).collect();
    Dataset::new(
        names,
        vec![ColumnKind::Continuous; p],
        columns,
        outcome,
        "y".into(),
    )
    .unwrap()
}

/// A fixed depth-3 rule testing three of the first five columns.
pub fn bench_rule() -> Rule {
    Rule {
        conditions: vec![
            Condition::at_least(0, 0.2),
            Condition {
                feature: 2,
                lower: Some(0.3),
                upper: Some(0.8),
            },
            Condition::below(4, 0.7),
        ],
        support: 0.3,
        depth: 3,
        scale: 1.0,
    }
}
