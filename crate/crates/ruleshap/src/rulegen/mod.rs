//! Rule generation: regression trees, the three-step smoothing random
//! forest, residualization against a linear-only fit, and extraction of
//! disaggregated, deduplicated decision rules with structured shrinkage
//! scales.

mod forest;
pub(crate) mod rules;
mod tree;

pub use forest::{fit_forest, smoothing_forest, CountingSource, Forest, OutcomeSource};
pub use rules::{
    disaggregate, extract_rules, read_rules_jsonl, structured_scale, write_rules_jsonl,
    Condition, Rule, SUPPORT_MAX, SUPPORT_MIN,
};
pub use tree::{fit_tree, Node, Tree};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Preprocessing};
use crate::error::{Error, Result};
use crate::horseshoe::{gibbs_fit_on_stream, GibbsConfig};
use crate::rng::StreamKind;
use crate::stats;

/// Hyperparameters of forest growth and rule extraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub n_trees: usize,
    /// Features considered per split; None means ceil(p / 3).
    pub mtry: Option<usize>,
    /// Support exponent of the structured scale A_k.
    pub mu: f64,
    /// Depth exponent of the structured scale A_k.
    pub eta: f64,
    /// Every leaf keeps at least max(10, ceil(frac * n)) rows.
    pub min_leaf_frac: f64,
    pub max_depth: usize,
    /// Cap on retained rules, first-come in extraction order.
    pub max_rules: usize,
    pub seed: u64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            n_trees: 500,
            mtry: None,
            mu: 1.0,
            eta: 2.0,
            min_leaf_frac: 0.025,
            max_depth: 3,
            max_rules: 500,
            seed: 0,
        }
    }
}

impl SmoothingConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be positive".into()));
        }
        if let Some(m) = self.mtry {
            if m == 0 || m > p {
                return Err(Error::InvalidConfig(format!(
                    "mtry must lie in 1..={p}, got {m}"
                )));
            }
        }
        if self.mu.is_nan() || self.mu <= 0.0 || self.eta.is_nan() || self.eta <= 0.0 {
            return Err(Error::InvalidConfig("mu and eta must be positive".into()));
        }
        if !(self.min_leaf_frac > 0.0 && self.min_leaf_frac < 1.0) {
            return Err(Error::InvalidConfig("min_leaf_frac must lie in (0,1)".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig("max_depth must be positive".into()));
        }
        if self.max_rules == 0 {
            return Err(Error::InvalidConfig("max_rules must be positive".into()));
        }
        Ok(())
    }

    pub fn resolved_mtry(&self, p: usize) -> usize {
        self.mtry.unwrap_or_else(|| p.div_ceil(3)).clamp(1, p.max(1))
    }

    pub fn leaf_floor(&self, n_fit: usize) -> usize {
        10usize.max((self.min_leaf_frac * n_fit as f64).ceil() as usize)
    }
}

/// Fit the linear-only model and return the outcome minus its posterior-mean
/// prediction. Rule generation runs on these residuals so rules target
/// structure the linear terms cannot absorb.
pub fn residualize(
    data: &Dataset,
    prep: &Preprocessing,
    cfg: &GibbsConfig,
) -> Result<Vec<f64>> {
    let y = data.outcome();
    let y_mean = stats::mean(y);
    let centered: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let retained = prep.retained_indices();
    if retained.is_empty() {
        return Ok(centered);
    }
    let columns: Vec<Vec<f64>> = retained
        .iter()
        .map(|&j| data.column(j).iter().map(|&x| prep.linear_value(j, x)).collect())
        .collect();
    let dm = crate::horseshoe::DesignMatrices::new(vec![], columns.clone(), centered.clone(), vec![])?;
    let draws = gibbs_fit_on_stream(&dm, cfg, StreamKind::Residualize)?;
    let b = draws.b_mean();
    Ok((0..data.n())
        .map(|i| {
            let fitted: f64 = b.iter().zip(&columns).map(|(coef, col)| coef * col[i]).sum();
            centered[i] - fitted
        })
        .collect())
}

/// The full generation pipeline: residualize, fit the smoothing forest on
/// the residuals, and extract rules.
pub fn generate_rules(
    data: &Dataset,
    prep: &Preprocessing,
    cfg: &SmoothingConfig,
    residual_cfg: &GibbsConfig,
) -> Result<Vec<Rule>> {
    let residuals = residualize(data, prep, residual_cfg)?;
    let forest = smoothing_forest(data, &residuals[..], cfg)?;
    Ok(extract_rules(forest.trees(), data, cfg))
}
