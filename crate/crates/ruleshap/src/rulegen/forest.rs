//! Bootstrap forests and the three-step smoothing scheme.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{stream, StreamKind};
use super::tree::{fit_tree, Tree};
use super::SmoothingConfig;

/// Read access to training outcomes. The indirection exists so tests can
/// count reads and prove the smoothing forest never touches the original
/// outcome when growing its final trees.
pub trait OutcomeSource: Sync {
    fn value(&self, row: usize) -> f64;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl OutcomeSource for [f64] {
    fn value(&self, row: usize) -> f64 {
        self[row]
    }

    fn len(&self) -> usize {
        <[f64]>::len(self)
    }
}

/// Wraps an outcome slice and counts every read.
pub struct CountingSource<'a> {
    values: &'a [f64],
    reads: AtomicU64,
}

impl<'a> CountingSource<'a> {
    pub fn new(values: &'a [f64]) -> Self {
        CountingSource {
            values,
            reads: AtomicU64::new(0),
        }
    }

    pub fn reads(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }
}

impl OutcomeSource for CountingSource<'_> {
    fn value(&self, row: usize) -> f64 {
        self.reads.fetch_add(1, Ordering::Relaxed);
        self.values[row]
    }

    fn len(&self) -> usize {
        self.values.len()
    }
}

#[derive(Clone, Debug)]
pub struct Forest {
    trees: Vec<Tree>,
    oob_predictions: Vec<f64>,
    oob_sigma2: f64,
    /// Rows that were in-bag in every tree and fell back to the global
    /// training mean.
    fallback_rows: Vec<usize>,
}

impl Forest {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn oob_predictions(&self) -> &[f64] {
        &self.oob_predictions
    }

    pub fn oob_sigma2(&self) -> f64 {
        self.oob_sigma2
    }

    pub fn fallback_rows(&self) -> &[usize] {
        &self.fallback_rows
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let total: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        total / self.trees.len() as f64
    }
}

/// Grow cfg.n_trees trees on independent n-sized bootstrap samples. Each
/// tree's stream first draws its n row indices, then one target per drawn
/// row via make_target. OOB predictions average the trees not containing a
/// row and are scored against eval.
fn fit_forest_impl<S, F>(
    data: &Dataset,
    eval: &S,
    make_target: F,
    cfg: &SmoothingConfig,
    kind: StreamKind,
) -> Result<Forest>
where
    S: OutcomeSource + ?Sized,
    F: Fn(usize, &mut ChaCha8Rng) -> f64 + Sync,
{
    let n = data.n();
    if n < 20 {
        return Err(Error::InsufficientData(format!(
            "forest fitting needs at least 20 rows, got {n}"
        )));
    }
    if eval.len() != n {
        return Err(Error::InvalidConfig(format!(
            "outcome length {} does not match {n} rows",
            eval.len()
        )));
    }
    cfg.validate(data.p())?;

    let trees: Vec<Tree> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(cfg.seed, kind, t as u64);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let targets: Vec<f64> = rows.iter().map(|&row| make_target(row, &mut rng)).collect();
            fit_tree(&rows, data, &targets, cfg, &mut rng)
        })
        .collect();

    let mut in_bag: Vec<Vec<bool>> = Vec::with_capacity(trees.len());
    for tree in &trees {
        let mut flags = vec![false; n];
        for &row in tree.bootstrap_indices() {
            flags[row] = true;
        }
        in_bag.push(flags);
    }
    let mut oob = vec![0.0; n];
    let mut fallback_rows = Vec::new();
    let mut pending_mean = Vec::new();
    for i in 0..n {
        let mut total = 0.0;
        let mut count = 0usize;
        for (tree, flags) in trees.iter().zip(&in_bag) {
            if !flags[i] {
                total += tree.predict_row(data, i);
                count += 1;
            }
        }
        if count > 0 {
            oob[i] = total / count as f64;
        } else {
            fallback_rows.push(i);
            pending_mean.push(i);
        }
    }
    if !pending_mean.is_empty() {
        let mean: f64 = (0..n).map(|i| eval.value(i)).sum::<f64>() / n as f64;
        for i in pending_mean {
            oob[i] = mean;
        }
    }
    let oob_sigma2 = (0..n)
        .map(|i| {
            let d = eval.value(i) - oob[i];
            d * d
        })
        .sum::<f64>()
        / n as f64;

    Ok(Forest {
        trees,
        oob_predictions: oob,
        oob_sigma2,
        fallback_rows,
    })
}

/// Plain bootstrap forest on the given outcome.
pub fn fit_forest<S>(data: &Dataset, source: &S, cfg: &SmoothingConfig) -> Result<Forest>
where
    S: OutcomeSource + ?Sized,
{
    fit_forest_impl(data, source, |row, _| source.value(row), cfg, StreamKind::Forest)
}

/// Three-step smoothing forest. Step 1 fits a plain forest on the outcome;
/// step 2 keeps its out-of-bag predictions and residual variance; step 3
/// grows a fresh forest whose bootstrap targets are independent
/// Normal(oob[row], sigma2) draws at every use, never the outcome itself.
/// The returned forest is the step-3 forest scored against the real
/// outcome.
pub fn smoothing_forest<S>(data: &Dataset, source: &S, cfg: &SmoothingConfig) -> Result<Forest>
where
    S: OutcomeSource + ?Sized,
{
    let step1 = fit_forest(data, source, cfg)?;
    let oob = step1.oob_predictions;
    let sigma = step1.oob_sigma2.sqrt();
    fit_forest_impl(
        data,
        source,
        |row, rng| {
            let z: f64 = StandardNormal.sample(rng);
            oob[row] + sigma * z
        },
        cfg,
        StreamKind::SmoothingForest,
    )
}
