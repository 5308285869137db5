//! The fitted model object: preprocessing record, rule set, and intercept,
//! with design-matrix assembly for fitting and prediction for explanation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnKind, Dataset, Preprocessing};
use crate::error::{Error, Result};
use crate::horseshoe::{DesignMatrices, PosteriorDraws};
use crate::rulegen::rules::{rule_from_record, rule_to_record, RuleJson};
use crate::rulegen::Rule;
use crate::stats;

/// Everything needed to evaluate F(x) = intercept + Σ a_k r_k(x) + Σ b_j x̃_j
/// once coefficients are supplied: the rules (raw-unit thresholds), the
/// linear-term preprocessing, and the column schema they index into.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedModel {
    /// Training outcome mean; predictions are offsets from it.
    pub intercept: f64,
    pub preprocessing: Preprocessing,
    pub rules: Vec<Rule>,
    pub column_names: Vec<String>,
    pub column_kinds: Vec<ColumnKind>,
    pub outcome_name: String,
}

impl FittedModel {
    pub fn new(
        data: &Dataset,
        preprocessing: Preprocessing,
        rules: Vec<Rule>,
    ) -> Result<Self> {
        if preprocessing.retained().len() != data.p() {
            return Err(Error::InvalidConfig(format!(
                "preprocessing covers {} columns but the dataset has {}",
                preprocessing.retained().len(),
                data.p()
            )));
        }
        for rule in &rules {
            if rule.conditions.iter().any(|c| c.feature >= data.p()) {
                return Err(Error::InvalidConfig(
                    "rule references a column beyond the dataset width".into(),
                ));
            }
        }
        Ok(FittedModel {
            intercept: stats::mean(data.outcome()),
            preprocessing,
            rules,
            column_names: data.names().to_vec(),
            column_kinds: data.kinds().to_vec(),
            outcome_name: data.outcome_name().to_string(),
        })
    }

    /// Width of the raw feature space the model evaluates on.
    pub fn n_columns(&self) -> usize {
        self.column_names.len()
    }

    /// Columns entering as linear terms, in design order.
    pub fn linear_indices(&self) -> Vec<usize> {
        self.preprocessing.retained_indices()
    }

    /// F(x) under one coefficient vector pair; `a` pairs with `rules`,
    /// `b` with `linear_indices()`.
    pub fn predict(&self, a: &[f64], b: &[f64], x: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.rules.len());
        debug_assert_eq!(x.len(), self.n_columns());
        let rule_part: f64 = self
            .rules
            .iter()
            .zip(a)
            .map(|(rule, coef)| coef * rule.evaluate(x))
            .sum();
        let linear_part: f64 = self
            .linear_indices()
            .iter()
            .zip(b)
            .map(|(&j, coef)| coef * self.preprocessing.linear_value(j, x[j]))
            .sum();
        self.intercept + rule_part + linear_part
    }

    /// F(x) at the posterior-mean coefficients.
    pub fn predict_mean(&self, draws: &PosteriorDraws, x: &[f64]) -> f64 {
        self.predict(&draws.a_mean(), &draws.b_mean(), x)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let record = ModelJson {
            intercept: self.intercept,
            outcome_name: self.outcome_name.clone(),
            column_names: self.column_names.clone(),
            column_kinds: self.column_kinds.clone(),
            preprocessing: self.preprocessing.clone(),
            rules: self.rules.iter().map(rule_to_record).collect(),
        };
        let text = serde_json::to_string_pretty(&record)?;
        std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let record: ModelJson = serde_json::from_str(&text)?;
        if !record.intercept.is_finite() {
            return Err(Error::InvalidConfig("model intercept is not finite".into()));
        }
        if record.column_names.len() != record.column_kinds.len()
            || record.column_names.len() != record.preprocessing.retained().len()
        {
            return Err(Error::InvalidConfig(
                "model column schema lengths disagree".into(),
            ));
        }
        let rules = record
            .rules
            .iter()
            .enumerate()
            .map(|(k, r)| {
                rule_from_record(r).map_err(|e| match e {
                    Error::InvalidConfig(msg) => Error::InvalidConfig(format!("rule {k}: {msg}")),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FittedModel {
            intercept: record.intercept,
            preprocessing: record.preprocessing,
            rules,
            column_names: record.column_names,
            column_kinds: record.column_kinds,
            outcome_name: record.outcome_name,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    intercept: f64,
    outcome_name: String,
    column_names: Vec<String>,
    column_kinds: Vec<ColumnKind>,
    preprocessing: Preprocessing,
    rules: Vec<RuleJson>,
}

/// Assemble the fitting design: raw 0/1 rule columns, centered linear
/// columns, and the centered outcome. Returns the outcome mean alongside so
/// the caller can record it as the intercept.
pub fn build_design(
    data: &Dataset,
    prep: &Preprocessing,
    rules: &[Rule],
) -> Result<(DesignMatrices, f64)> {
    let rule_columns: Vec<Vec<f64>> = rules
        .iter()
        .map(|rule| {
            (0..data.n())
                .map(|i| f64::from(rule.matches_row(data, i)))
                .collect()
        })
        .collect();
    let linear_columns: Vec<Vec<f64>> = prep
        .retained_indices()
        .iter()
        .map(|&j| {
            data.column(j)
                .iter()
                .map(|&x| prep.linear_value(j, x))
                .collect()
        })
        .collect();
    let scales: Vec<f64> = rules.iter().map(|r| r.scale).collect();
    let y_mean = stats::mean(data.outcome());
    let y_centered: Vec<f64> = data.outcome().iter().map(|v| v - y_mean).collect();
    let dm = DesignMatrices::new(rule_columns, linear_columns, y_centered, scales)?;
    Ok((dm, y_mean))
}
