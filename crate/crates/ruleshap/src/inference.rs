//! Posterior aggregation of Shapley cubes: per-cell credible intervals and
//! significance flags, per-feature rejection rates, interaction summaries,
//! and the classical RuleFit importance measures as a comparison baseline.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::horseshoe::PosteriorDraws;
use crate::model::FittedModel;
use crate::shapley::ShapleyCube;
use crate::stats;

/// Posterior summary of one (probe, feature) or (probe, pair) cell.
/// Significance means the equal-tailed interval excludes zero strictly;
/// a degenerate all-zero cell yields [0, 0] and is not significant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellSummary {
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
    pub significant: bool,
}

fn summarize_cell(values: &[f64], alpha: f64) -> CellSummary {
    let (lower, upper) = stats::equal_tailed_interval(values, alpha);
    CellSummary {
        mean: stats::mean(values),
        sd: stats::sd_sample(values),
        lower,
        upper,
        significant: lower > 0.0 || upper < 0.0,
    }
}

fn validate_cube(cube: &ShapleyCube, alpha: f64) -> Result<Vec<String>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    if cube.n_draws() < 2 {
        return Err(Error::InsufficientData(
            "cell summaries need at least 2 draws".into(),
        ));
    }
    let mut warnings = Vec::new();
    if cube.n_draws() < 100 {
        warnings.push(format!(
            "only {} retained draws; interval endpoints will be coarse",
            cube.n_draws()
        ));
    }
    if !cube.skipped().is_empty() && cube.skipped().len() == cube.n_probes() {
        warnings.push("every probe was skipped; rejection rates default to 0".into());
    }
    Ok(warnings)
}

/// Per-cell effect summaries over a cube, with per-feature rejection rates.
/// Skipped probes keep their (all-zero, never significant) cells but are
/// left out of the rejection-rate denominators.
#[derive(Clone, Debug)]
pub struct EffectReport {
    feature_names: Vec<String>,
    alpha: f64,
    n_probes: usize,
    /// Probe-major: cell of (probe i, feature f) lives at i * F + f.
    cells: Vec<CellSummary>,
    rejection_rates: Vec<f64>,
    skipped: Vec<usize>,
    warnings: Vec<String>,
}

impl EffectReport {
    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_probes(&self) -> usize {
        self.n_probes
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn cell(&self, probe: usize, feature: usize) -> &CellSummary {
        &self.cells[probe * self.n_features() + feature]
    }

    /// Fraction of evaluated probes whose interval excludes zero, per
    /// feature.
    pub fn rejection_rates(&self) -> &[f64] {
        &self.rejection_rates
    }

    pub fn skipped(&self) -> &[usize] {
        &self.skipped
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// One row per (probe, feature) cell, including skipped probes.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("row_id,feature,mean,lower,upper,significant\n");
        for i in 0..self.n_probes {
            for (f, name) in self.feature_names.iter().enumerate() {
                let cell = self.cell(i, f);
                let _ = writeln!(
                    out,
                    "{i},{name},{},{},{},{}",
                    cell.mean, cell.lower, cell.upper, cell.significant
                );
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Summarize every (probe, feature) cell of the cube at level `alpha`.
pub fn effect_report(cube: &ShapleyCube, alpha: f64) -> Result<EffectReport> {
    let warnings = validate_cube(cube, alpha)?;
    let n_features = cube.n_features();
    let n_probes = cube.n_probes();
    let per_feature: Vec<Vec<CellSummary>> = (0..n_features)
        .into_par_iter()
        .map(|f| {
            let slice = cube.feature_matrix(f);
            (0..n_probes)
                .map(|i| {
                    let column: Vec<f64> = slice.column(i).iter().copied().collect();
                    summarize_cell(&column, alpha)
                })
                .collect()
        })
        .collect();
    let mut cells = Vec::with_capacity(n_probes * n_features);
    for i in 0..n_probes {
        for cols in &per_feature {
            cells.push(cols[i]);
        }
    }
    let evaluated = n_probes - cube.skipped().len();
    let rejection_rates = (0..n_features)
        .map(|f| {
            if evaluated == 0 {
                return 0.0;
            }
            let hits = (0..n_probes)
                .filter(|&i| !cube.is_skipped(i) && cells[i * n_features + f].significant)
                .count();
            hits as f64 / evaluated as f64
        })
        .collect();
    Ok(EffectReport {
        feature_names: cube.feature_names().to_vec(),
        alpha,
        n_probes,
        cells,
        rejection_rates,
        skipped: cube.skipped().iter().map(|s| s.index).collect(),
        warnings,
    })
}

/// Average the per-feature rejection rates within named groups. Every
/// feature in the report must be assigned a group.
pub fn rejection_rates(
    report: &EffectReport,
    grouping: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, f64>> {
    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for (name, &rate) in report.feature_names().iter().zip(report.rejection_rates()) {
        let group = grouping.get(name).ok_or_else(|| {
            Error::InvalidConfig(format!("feature {name} is missing from the grouping"))
        })?;
        let entry = sums.entry(group).or_insert((0.0, 0));
        entry.0 += rate;
        entry.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(group, (sum, count))| (group.to_string(), sum / count as f64))
        .collect())
}

/// Per-cell interaction summaries plus the per-pair aggregate: how many
/// evaluated probes were significant and the mean absolute posterior-mean
/// value over those probes. Pairs no rule supports are identically zero
/// and are not materialized; lookups treat them as zero counts.
#[derive(Clone, Debug)]
pub struct InteractionReport {
    feature_names: Vec<String>,
    pair_labels: Vec<(usize, usize)>,
    alpha: f64,
    n_probes: usize,
    /// Probe-major: cell of (probe i, pair q) lives at i * pairs + q.
    cells: Vec<CellSummary>,
    mean_abs: Vec<f64>,
    counts: Vec<usize>,
    skipped: Vec<usize>,
    warnings: Vec<String>,
}

impl InteractionReport {
    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn pair_labels(&self) -> &[(usize, usize)] {
        &self.pair_labels
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n_probes(&self) -> usize {
        self.n_probes
    }

    fn pair_position(&self, f: usize, fp: usize) -> Option<usize> {
        let key = (f.min(fp), f.max(fp));
        self.pair_labels.binary_search(&key).ok()
    }

    pub fn cell(&self, probe: usize, f: usize, fp: usize) -> Option<&CellSummary> {
        self.pair_position(f, fp)
            .map(|q| &self.cells[probe * self.pair_labels.len() + q])
    }

    /// Number of evaluated probes whose interval excludes zero; symmetric,
    /// zero for unsupported pairs.
    pub fn count(&self, f: usize, fp: usize) -> usize {
        self.pair_position(f, fp).map_or(0, |q| self.counts[q])
    }

    /// Mean absolute posterior-mean value over the significant probes;
    /// symmetric, zero when no probe is significant.
    pub fn mean_abs(&self, f: usize, fp: usize) -> f64 {
        self.pair_position(f, fp).map_or(0.0, |q| self.mean_abs[q])
    }

    pub fn skipped(&self) -> &[usize] {
        &self.skipped
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// One row per (probe, supported pair) cell, including skipped probes.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("row_id,feature_a,feature_b,mean,lower,upper,significant\n");
        for i in 0..self.n_probes {
            for (q, &(f, fp)) in self.pair_labels.iter().enumerate() {
                let cell = &self.cells[i * self.pair_labels.len() + q];
                let _ = writeln!(
                    out,
                    "{i},{},{},{},{},{},{}",
                    self.feature_names[f],
                    self.feature_names[fp],
                    cell.mean,
                    cell.lower,
                    cell.upper,
                    cell.significant
                );
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Summarize every (probe, pair) interaction cell of the cube at level
/// `alpha`. The cube must have been built with interactions.
pub fn interaction_report(cube: &ShapleyCube, alpha: f64) -> Result<InteractionReport> {
    let warnings = validate_cube(cube, alpha)?;
    let pair_labels = cube.pair_labels().to_vec();
    let n_probes = cube.n_probes();
    let per_pair: Vec<Vec<CellSummary>> = (0..pair_labels.len())
        .into_par_iter()
        .map(|q| {
            let slice = cube.interaction_matrix(q);
            (0..n_probes)
                .map(|i| {
                    let column: Vec<f64> = slice.column(i).iter().copied().collect();
                    summarize_cell(&column, alpha)
                })
                .collect()
        })
        .collect();
    let mut cells = Vec::with_capacity(n_probes * pair_labels.len());
    for i in 0..n_probes {
        for cols in &per_pair {
            cells.push(cols[i]);
        }
    }
    let mut mean_abs = vec![0.0; pair_labels.len()];
    let mut counts = vec![0usize; pair_labels.len()];
    for (q, cols) in per_pair.iter().enumerate() {
        let significant: Vec<&CellSummary> = cols
            .iter()
            .enumerate()
            .filter(|(i, cell)| !cube.is_skipped(*i) && cell.significant)
            .map(|(_, cell)| cell)
            .collect();
        counts[q] = significant.len();
        if !significant.is_empty() {
            mean_abs[q] =
                significant.iter().map(|c| c.mean.abs()).sum::<f64>() / significant.len() as f64;
        }
    }
    Ok(InteractionReport {
        feature_names: cube.feature_names().to_vec(),
        pair_labels,
        alpha,
        n_probes,
        cells,
        mean_abs,
        counts,
        skipped: cube.skipped().iter().map(|s| s.index).collect(),
        warnings,
    })
}

/// Classical RuleFit feature importance from point coefficients (posterior
/// means), per dataset column. With a probe the local form
/// |b_j| |x_j - mean| + sum over rules |a_k| |r_k(x) - mean| / depth;
/// without one the global form with sd(x_j) and sqrt(rbar (1 - rbar)).
/// Linear terms are measured on the model's design scale. This is a
/// comparison baseline only: the equal split across a rule's features is
/// exactly the distortion the Shapley attributions avoid.
pub fn rulefit_importance(
    model: &FittedModel,
    draws: &PosteriorDraws,
    data: &Dataset,
    x_star: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if draws.q() != model.rules.len() || draws.p() != model.linear_indices().len() {
        return Err(Error::InvalidConfig(format!(
            "draws have {} rule and {} linear coefficients, model expects {} and {}",
            draws.q(),
            draws.p(),
            model.rules.len(),
            model.linear_indices().len()
        )));
    }
    if data.p() != model.n_columns() {
        return Err(Error::InvalidConfig(format!(
            "data has {} columns, model expects {}",
            data.p(),
            model.n_columns()
        )));
    }
    if let Some(x) = x_star {
        if x.len() != model.n_columns() {
            return Err(Error::InvalidConfig(format!(
                "probe has {} entries, model expects {}",
                x.len(),
                model.n_columns()
            )));
        }
    }
    let a = draws.a_mean();
    let b = draws.b_mean();
    let mut importance = vec![0.0; model.n_columns()];

    for (idx, &j) in model.linear_indices().iter().enumerate() {
        let values: Vec<f64> = data
            .column(j)
            .iter()
            .map(|&x| model.preprocessing.linear_value(j, x))
            .collect();
        importance[j] = match x_star {
            Some(x) => {
                let lv = model.preprocessing.linear_value(j, x[j]);
                b[idx].abs() * (lv - stats::mean(&values)).abs()
            }
            None => b[idx].abs() * stats::sd(&values),
        };
    }
    for (k, rule) in model.rules.iter().enumerate() {
        let rbar = (0..data.n()).filter(|&t| rule.matches_row(data, t)).count() as f64
            / data.n() as f64;
        let share = match x_star {
            Some(x) => a[k].abs() * (rule.evaluate(x) - rbar).abs() / rule.depth as f64,
            None => a[k].abs() * (rbar * (1.0 - rbar)).sqrt() / rule.depth as f64,
        };
        for condition in &rule.conditions {
            importance[condition.feature] += share;
        }
    }
    Ok(importance)
}
