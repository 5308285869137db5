//! Data ingestion, preprocessing, and the correlated Friedman benchmark.
//!
//! A [`Dataset`] is an immutable numeric feature matrix plus outcome.
//! Categorical CSV columns are expanded into per-level dummy columns coded
//! -0.5/2 at load time, so downstream modules only ever see numbers.
//! [`Preprocessing`] captures the linear-term view: continuous columns are
//! winsorized at empirical quantiles and standardized; dummy columns keep
//! their coding. Trees and rules always evaluate raw column values.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::{stream, StreamKind};
use crate::stats;

/// Centering constant of the binary Friedman variant's logistic map.
pub const ETA_BAR: f64 = 14.4;

/// Dummy columns code level membership as 2 and non-membership as -0.5, so a
/// balanced five-level factor yields columns with mean 0 and variance 1.
pub const DUMMY_MEMBER: f64 = 2.0;
pub const DUMMY_NON_MEMBER: f64 = -0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ColumnKind {
    Continuous,
    /// One level of an expanded categorical column.
    Dummy { factor: String, level: String },
}

impl ColumnKind {
    pub fn is_continuous(&self) -> bool {
        matches!(self, ColumnKind::Continuous)
    }
}

/// Immutable feature matrix (column-major) with outcome.
#[derive(Clone, Debug)]
pub struct Dataset {
    names: Vec<String>,
    kinds: Vec<ColumnKind>,
    columns: Vec<Vec<f64>>,
    outcome: Vec<f64>,
    outcome_name: String,
}

impl Dataset {
    pub fn new(
        names: Vec<String>,
        kinds: Vec<ColumnKind>,
        columns: Vec<Vec<f64>>,
        outcome: Vec<f64>,
        outcome_name: String,
    ) -> Result<Self> {
        if names.len() != columns.len() || names.len() != kinds.len() {
            return Err(Error::InvalidConfig(
                "column names, kinds and data must align".into(),
            ));
        }
        let n = outcome.len();
        if n == 0 {
            return Err(Error::InsufficientData("dataset has no rows".into()));
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if !seen.insert(name.clone()) {
                return Err(Error::InvalidConfig(format!("duplicate column {name:?}")));
            }
        }
        if seen.contains(&outcome_name) {
            return Err(Error::InvalidConfig(format!(
                "outcome {outcome_name:?} collides with a feature column"
            )));
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::InvalidConfig(format!(
                    "column {name:?} has {} rows, outcome has {n}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "column {name:?} contains non-finite values"
                )));
            }
        }
        if outcome.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("outcome contains non-finite values".into()));
        }
        Ok(Dataset {
            names,
            kinds,
            columns,
            outcome,
            outcome_name,
        })
    }

    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn value(&self, row: usize, j: usize) -> f64 {
        self.columns[j][row]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome_name
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// CSV text mirroring the input format: header row, '.' decimal
    /// separator, outcome as the final column.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self
            .names
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(self.outcome_name.as_str()))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.n() {
            let mut fields: Vec<String> = self.columns.iter().map(|c| c[i].to_string()).collect();
            fields.push(self.outcome[i].to_string());
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

/// What load_csv had to discard, reported instead of silently dropped.
#[derive(Clone, Debug, Default)]
pub struct LoadReport {
    /// 0-based data-row indices (header excluded) rejected for missing or
    /// non-finite entries.
    pub dropped_rows: Vec<usize>,
}

impl LoadReport {
    pub fn warning(&self) -> Option<String> {
        if self.dropped_rows.is_empty() {
            None
        } else {
            Some(format!(
                "dropped {} row(s) with missing or non-finite entries: {:?}",
                self.dropped_rows.len(),
                self.dropped_rows
            ))
        }
    }
}

fn is_missing_token(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "NaN")
}

/// Parse a CSV file with a header row. Numeric columns load directly;
/// columns with any non-numeric, non-missing cell are treated as categorical
/// and expanded into dummy columns. Rows with missing or non-finite entries
/// are dropped and reported.
pub fn load_csv(path: &Path, outcome_name: &str) -> Result<(Dataset, LoadReport)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let outcome_idx = headers
        .iter()
        .position(|h| h == outcome_name)
        .ok_or_else(|| Error::MissingColumn(outcome_name.to_string()))?;

    let mut cells: Vec<Vec<String>> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::RaggedRow {
                row: row_idx,
                expected: headers.len(),
                found: record.len(),
            });
        }
        cells.push(record.iter().map(|c| c.trim().to_string()).collect());
    }

    // A cell is usable when it is a finite number; a column is numeric when
    // every usable cell parses. "NaN" parses as f64 but counts as missing.
    let n_raw = cells.len();
    let n_cols = headers.len();
    let mut numeric: Vec<bool> = vec![true; n_cols];
    for row in &cells {
        for (j, cell) in row.iter().enumerate() {
            if !is_missing_token(cell) && cell.parse::<f64>().is_err() {
                numeric[j] = false;
            }
        }
    }
    if !numeric[outcome_idx] {
        return Err(Error::InvalidConfig(format!(
            "outcome column {outcome_name:?} is not numeric"
        )));
    }

    // Reject columns with no usable values at all.
    for (j, header) in headers.iter().enumerate() {
        let all_missing = cells.iter().all(|row| {
            is_missing_token(&row[j])
                || (numeric[j] && row[j].parse::<f64>().map_or(true, |v| !v.is_finite()))
        });
        if n_raw == 0 || all_missing {
            return Err(Error::RejectedColumn(header.clone()));
        }
    }

    // A row survives when every column has a usable value.
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    'rows: for (i, row) in cells.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if is_missing_token(cell) {
                dropped.push(i);
                continue 'rows;
            }
            if numeric[j] && !row[j].parse::<f64>().map(|v| v.is_finite()).unwrap_or(false) {
                dropped.push(i);
                continue 'rows;
            }
        }
        kept.push(i);
    }
    if kept.is_empty() {
        return Err(Error::InsufficientData(
            "no complete rows after dropping missing entries".into(),
        ));
    }

    let mut names = Vec::new();
    let mut kinds = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (j, header) in headers.iter().enumerate() {
        if j == outcome_idx {
            continue;
        }
        if numeric[j] {
            names.push(header.clone());
            kinds.push(ColumnKind::Continuous);
            columns.push(
                kept.iter()
                    .map(|&i| cells[i][j].parse::<f64>().unwrap())
                    .collect(),
            );
        } else {
            let labels: Vec<String> = kept.iter().map(|&i| cells[i][j].clone()).collect();
            let (levels, coded) = dummy_code(&labels)
                .map_err(|_| Error::DegenerateFactor(header.clone()))?;
            for (level, col) in levels.into_iter().zip(coded) {
                names.push(format!("{header}={level}"));
                kinds.push(ColumnKind::Dummy {
                    factor: header.clone(),
                    level,
                });
                columns.push(col);
            }
        }
    }
    let outcome: Vec<f64> = kept
        .iter()
        .map(|&i| cells[i][outcome_idx].parse::<f64>().unwrap())
        .collect();

    let dataset = Dataset::new(names, kinds, columns, outcome, outcome_name.to_string())?;
    Ok((dataset, LoadReport { dropped_rows: dropped }))
}

/// Expand category labels into per-level columns: members coded 2,
/// non-members -0.5. Levels are emitted in sorted order.
pub fn dummy_code(labels: &[String]) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let levels: Vec<String> = labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if levels.len() < 2 {
        return Err(Error::DegenerateFactor(
            levels.first().cloned().unwrap_or_default(),
        ));
    }
    let columns = levels
        .iter()
        .map(|level| {
            labels
                .iter()
                .map(|l| if l == level { DUMMY_MEMBER } else { DUMMY_NON_MEMBER })
                .collect()
        })
        .collect();
    Ok((levels, columns))
}

/// The linear-term view of a dataset: winsorization bounds, standardization
/// moments, and centering constants, all frozen on training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    /// Per column: (lower, upper) clamp bounds; None for dummy columns.
    bounds: Vec<Option<(f64, f64)>>,
    /// Mean of the winsorized column (continuous) or 0 (dummy).
    means: Vec<f64>,
    /// Population sd of the winsorized column (continuous) or 1 (dummy).
    scales: Vec<f64>,
    /// Training mean of the transformed column, subtracted at design
    /// assembly so every linear column is centered (dummies included).
    centers: Vec<f64>,
    /// Columns kept as linear terms; zero-variance columns are excluded.
    retained: Vec<bool>,
}

impl Preprocessing {
    pub fn bounds(&self, j: usize) -> Option<(f64, f64)> {
        self.bounds[j]
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.means[j]
    }

    pub fn scale(&self, j: usize) -> f64 {
        self.scales[j]
    }

    pub fn center(&self, j: usize) -> f64 {
        self.centers[j]
    }

    pub fn retained(&self) -> &[bool] {
        &self.retained
    }

    pub fn n_retained(&self) -> usize {
        self.retained.iter().filter(|&&r| r).count()
    }

    /// Indices of columns kept as linear terms, in column order.
    pub fn retained_indices(&self) -> Vec<usize> {
        (0..self.retained.len()).filter(|&j| self.retained[j]).collect()
    }

    pub fn winsorize(&self, j: usize, x: f64) -> f64 {
        match self.bounds[j] {
            Some((lo, hi)) => x.clamp(lo, hi),
            None => x,
        }
    }

    /// Linear-view value: winsorized and standardized for continuous
    /// columns, the raw coding for dummies. Uncentered.
    pub fn transform(&self, j: usize, x: f64) -> f64 {
        match self.bounds[j] {
            Some(_) => (self.winsorize(j, x) - self.means[j]) / self.scales[j],
            None => x,
        }
    }

    /// Centered linear-view value, the design-matrix entry.
    pub fn linear_value(&self, j: usize, x: f64) -> f64 {
        self.transform(j, x) - self.centers[j]
    }
}

/// Fit winsorization bounds at the (lower_q, upper_q) empirical quantiles of
/// each continuous column, then standardization moments on the winsorized
/// values. Dummy columns pass through untouched.
pub fn fit_preprocessing(data: &Dataset, lower_q: f64, upper_q: f64) -> Result<Preprocessing> {
    if !(0.0..=1.0).contains(&lower_q) || !(0.0..=1.0).contains(&upper_q) || lower_q >= upper_q {
        return Err(Error::InvalidConfig(format!(
            "winsorization quantiles must satisfy 0 <= lower < upper <= 1, got ({lower_q}, {upper_q})"
        )));
    }
    if data.n() < 2 {
        return Err(Error::InsufficientData(
            "preprocessing needs at least 2 rows".into(),
        ));
    }
    let mut bounds = Vec::with_capacity(data.p());
    let mut means = Vec::with_capacity(data.p());
    let mut scales = Vec::with_capacity(data.p());
    let mut centers = Vec::with_capacity(data.p());
    let mut retained = Vec::with_capacity(data.p());
    for j in 0..data.p() {
        let col = data.column(j);
        match data.kinds()[j] {
            ColumnKind::Continuous => {
                let mut sorted = col.to_vec();
                sorted.sort_unstable_by(f64::total_cmp);
                let lo = stats::quantile_sorted(&sorted, lower_q);
                let hi = stats::quantile_sorted(&sorted, upper_q);
                let winsorized: Vec<f64> = col.iter().map(|&x| x.clamp(lo, hi)).collect();
                let m = stats::mean(&winsorized);
                let s = stats::sd(&winsorized);
                let keep = s > 0.0;
                bounds.push(Some((lo, hi)));
                means.push(m);
                scales.push(if keep { s } else { 1.0 });
                centers.push(if keep {
                    let transformed: Vec<f64> =
                        winsorized.iter().map(|&x| (x - m) / s).collect();
                    stats::mean(&transformed)
                } else {
                    0.0
                });
                retained.push(keep);
            }
            ColumnKind::Dummy { .. } => {
                let m = stats::mean(col);
                let keep = stats::variance(col) > 0.0;
                bounds.push(None);
                means.push(0.0);
                scales.push(1.0);
                centers.push(m);
                retained.push(keep);
            }
        }
    }
    Ok(Preprocessing {
        bounds,
        means,
        scales,
        centers,
        retained,
    })
}

/// Configuration of the synthetic benchmark generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FriedmanConfig {
    pub n: usize,
    pub p: usize,
    /// Target pairwise Pearson correlation of the uniform features.
    pub rho: f64,
    /// Outcome noise variance (continuous variant).
    pub sigma2: f64,
    pub seed: u64,
    pub binary: bool,
}

impl FriedmanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be positive".into()));
        }
        if self.p < 5 {
            return Err(Error::InvalidConfig(
                "p must be at least 5 so all signal features exist".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidConfig("rho must lie in [0, 1)".into()));
        }
        if !self.sigma2.is_finite() || self.sigma2 < 0.0 {
            return Err(Error::InvalidConfig("sigma2 must be non-negative".into()));
        }
        Ok(())
    }
}

/// The benchmark signal 10*sin(pi*x1*x2) + 20*(x3-0.5)^2 + 10*x4 + 5*x5;
/// features beyond the fifth are pure noise.
pub fn friedman_signal(x: &[f64]) -> f64 {
    10.0 * (std::f64::consts::PI * x[0] * x[1]).sin()
        + 20.0 * (x[2] - 0.5) * (x[2] - 0.5)
        + 10.0 * x[3]
        + 5.0 * x[4]
}

/// Success probability of the binary variant: logistic(eta - ETA_BAR).
pub fn friedman_binary_probability(eta: f64) -> f64 {
    let z = eta - ETA_BAR;
    1.0 / (1.0 + (-z).exp())
}

/// Generate features marginally Uniform(0,1) with target equicorrelation
/// rho via a Gaussian copula, plus the Friedman outcome. A pure function of
/// the config; feature draws and noise draws use separate seed substreams so
/// datasets with different sigma2 share identical features.
pub fn friedman_generate(cfg: &FriedmanConfig) -> Result<Dataset> {
    cfg.validate()?;
    // Pearson correlation r between the copula uniforms relates to the
    // latent normal correlation by r = (6/pi)*asin(rho_z/2); invert it.
    let rho_z = 2.0 * (std::f64::consts::PI * cfg.rho / 6.0).sin();
    let shared = rho_z.sqrt();
    let own = (1.0 - rho_z).sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut feature_rng = stream(cfg.seed, StreamKind::Features, 0);
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.n); cfg.p];
    for _ in 0..cfg.n {
        let w: f64 = StandardNormal.sample(&mut feature_rng);
        for col in columns.iter_mut() {
            let v: f64 = StandardNormal.sample(&mut feature_rng);
            let z = shared * w + own * v;
            col.push(normal.cdf(z));
        }
    }

    let mut noise_rng = stream(cfg.seed, StreamKind::Noise, 0);
    let sigma = cfg.sigma2.sqrt();
    let outcome: Vec<f64> = (0..cfg.n)
        .map(|i| {
            let x: Vec<f64> = columns.iter().map(|c| c[i]).collect();
            let eta = friedman_signal(&x);
            if cfg.binary {
                let u: f64 = noise_rng.random();
                if u < friedman_binary_probability(eta) {
                    1.0
                } else {
                    0.0
                }
            } else {
                let z: f64 = StandardNormal.sample(&mut noise_rng);
                eta + sigma * z
            }
        })
        .collect();

    let names = (1..=cfg.p).map(|j| format!("x{j}")).collect();
    let kinds = vec![ColumnKind::Continuous; cfg.p];
    Dataset::new(names, kinds, columns, outcome, "y".to_string())
}

/// Group labels file support for reports: feature name -> group label.
pub fn load_grouping(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut map = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        if record.len() < 2 {
            return Err(Error::InvalidConfig(
                "grouping file needs feature,group columns".into(),
            ));
        }
        map.insert(record[0].trim().to_string(), record[1].trim().to_string());
    }
    Ok(map)
}
