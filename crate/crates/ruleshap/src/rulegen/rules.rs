//! Decision rules: disaggregation of tree paths, canonicalization,
//! deduplication, support filtering, structured shrinkage scales, and the
//! JSON-lines exchange format.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use super::tree::Tree;
use super::SmoothingConfig;

/// Retained rules must cover between 2.5% and 97.5% of training rows.
pub const SUPPORT_MIN: f64 = 0.025;
pub const SUPPORT_MAX: f64 = 0.975;

/// One feature's interval along a rule: x >= lower and x < upper, either
/// bound optional but not both absent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Condition {
    pub feature: usize,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Condition {
    pub fn below(feature: usize, upper: f64) -> Self {
        Condition {
            feature,
            lower: None,
            upper: Some(upper),
        }
    }

    pub fn at_least(feature: usize, lower: f64) -> Self {
        Condition {
            feature,
            lower: Some(lower),
            upper: None,
        }
    }

    pub fn matches(&self, x: f64) -> bool {
        self.lower.is_none_or(|lo| x >= lo) && self.upper.is_none_or(|hi| x < hi)
    }

    fn key(&self) -> (usize, Option<u64>, Option<u64>) {
        (
            self.feature,
            self.lower.map(f64::to_bits),
            self.upper.map(f64::to_bits),
        )
    }
}

/// A conjunction of interval conditions on distinct features.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    /// Sorted by feature index.
    pub conditions: Vec<Condition>,
    /// Fraction of training rows matched.
    pub support: f64,
    /// Number of conditions.
    pub depth: usize,
    /// Structured shrinkage scale A_k.
    pub scale: f64,
}

impl Rule {
    pub fn matches(&self, x: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.matches(x[c.feature]))
    }

    pub fn matches_row(&self, data: &Dataset, row: usize) -> bool {
        self.conditions
            .iter()
            .all(|c| c.matches(data.value(row, c.feature)))
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        f64::from(self.matches(x))
    }

    pub fn features(&self) -> Vec<usize> {
        self.conditions.iter().map(|c| c.feature).collect()
    }
}

/// A_k = (2 min(s, 1-s))^(mu - 1/2) / (m^eta sqrt(2 max(s, 1-s))): widest
/// for balanced supports, shrinking in depth.
pub fn structured_scale(support: f64, depth: usize, mu: f64, eta: f64) -> f64 {
    let minority = support.min(1.0 - support);
    let majority = support.max(1.0 - support);
    (2.0 * minority).powf(mu - 0.5) / ((depth as f64).powf(eta) * (2.0 * majority).sqrt())
}

/// All 2^m - 1 nonempty condition subsets of a path, enumerated in bitmask
/// order over the path's conditions.
pub fn disaggregate(conditions: &[Condition]) -> Vec<Vec<Condition>> {
    let m = conditions.len();
    assert!(m >= 1, "paths must carry at least one condition");
    (1..(1usize << m))
        .map(|mask| {
            (0..m)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| conditions[i])
                .collect()
        })
        .collect()
}

fn round3(c: f64) -> f64 {
    (c * 1000.0).round() / 1000.0
}

/// Merge a root-to-leaf path into one interval condition per feature,
/// rounding thresholds of continuous features to 3 decimals. Left branches
/// (x <= t) become upper bounds, right branches lower bounds.
fn merge_path(path: &[(usize, f64, bool)], data: &Dataset) -> Vec<Condition> {
    let mut by_feature: BTreeMap<usize, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for &(feature, threshold, goes_left) in path {
        let t = if data.kinds()[feature].is_continuous() {
            round3(threshold)
        } else {
            threshold
        };
        let entry = by_feature.entry(feature).or_insert((None, None));
        if goes_left {
            entry.1 = Some(entry.1.map_or(t, |hi: f64| hi.min(t)));
        } else {
            entry.0 = Some(entry.0.map_or(t, |lo: f64| lo.max(t)));
        }
    }
    by_feature
        .into_iter()
        .map(|(feature, (lower, upper))| Condition {
            feature,
            lower,
            upper,
        })
        .collect()
}

/// Canonicalize, deduplicate, compute support, filter, resolve complement
/// pairs, attach scales, and cap the rule count.
fn finalize_rules(
    candidates: Vec<Vec<Condition>>,
    data: &Dataset,
    cfg: &SmoothingConfig,
) -> Vec<Rule> {
    let n = data.n() as f64;
    let mut seen = HashSet::new();
    let mut rules = Vec::new();
    for mut conditions in candidates {
        conditions.sort_by_key(|c| c.feature);
        let key: Vec<_> = conditions.iter().map(Condition::key).collect();
        if !seen.insert(key) {
            continue;
        }
        let matched = (0..data.n())
            .filter(|&i| conditions.iter().all(|c| c.matches(data.value(i, c.feature))))
            .count();
        let support = matched as f64 / n;
        if !(SUPPORT_MIN..=SUPPORT_MAX).contains(&support) {
            continue;
        }
        let depth = conditions.len();
        rules.push(Rule {
            scale: structured_scale(support, depth, cfg.mu, cfg.eta),
            conditions,
            support,
            depth,
        });
    }

    // A single "x < c" rule and its complement "x >= c" are affinely
    // dependent columns; when both survive, keep the "<" form.
    let below_forms: HashSet<(usize, u64)> = rules
        .iter()
        .filter(|r| r.depth == 1 && r.conditions[0].lower.is_none())
        .filter_map(|r| r.conditions[0].upper.map(|hi| (r.conditions[0].feature, hi.to_bits())))
        .collect();
    rules.retain(|r| {
        if r.depth != 1 || r.conditions[0].upper.is_some() {
            return true;
        }
        match r.conditions[0].lower {
            Some(lo) => !below_forms.contains(&(r.conditions[0].feature, lo.to_bits())),
            None => true,
        }
    });

    rules.truncate(cfg.max_rules);
    rules
}

/// Turn every root-to-leaf path of every tree into rules: merge same-feature
/// conditions, round thresholds, disaggregate into all nonempty subsets,
/// then canonicalize, deduplicate keeping first occurrences, filter by
/// support on the full training data, resolve complement pairs, and cap at
/// cfg.max_rules. An empty result means the model degrades to linear-only.
pub fn extract_rules(trees: &[Tree], data: &Dataset, cfg: &SmoothingConfig) -> Vec<Rule> {
    let mut candidates = Vec::new();
    for tree in trees {
        for path in tree.paths() {
            if path.is_empty() {
                continue;
            }
            let merged = merge_path(&path, data);
            candidates.extend(disaggregate(&merged));
        }
    }
    finalize_rules(candidates, data, cfg)
}

#[derive(Serialize, Deserialize)]
pub(crate) struct ConditionJson {
    j: usize,
    op: String,
    c: f64,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct RuleJson {
    conditions: Vec<ConditionJson>,
    support: f64,
    depth: usize,
    scale: f64,
}

/// Flatten a rule into its serialized record; interval conditions emit a
/// ">=" entry followed by a "<" entry for the same feature.
pub(crate) fn rule_to_record(rule: &Rule) -> RuleJson {
    let mut conditions = Vec::new();
    for c in &rule.conditions {
        if let Some(lo) = c.lower {
            conditions.push(ConditionJson {
                j: c.feature,
                op: ">=".into(),
                c: lo,
            });
        }
        if let Some(hi) = c.upper {
            conditions.push(ConditionJson {
                j: c.feature,
                op: "<".into(),
                c: hi,
            });
        }
    }
    RuleJson {
        conditions,
        support: rule.support,
        depth: rule.depth,
        scale: rule.scale,
    }
}

/// Rebuild and validate a rule from its serialized record; entries sharing a
/// feature re-merge into one interval condition (">=" keeps the largest
/// bound, "<" the smallest).
pub(crate) fn rule_from_record(record: &RuleJson) -> Result<Rule> {
    let mut by_feature: BTreeMap<usize, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for c in &record.conditions {
        let entry = by_feature.entry(c.j).or_insert((None, None));
        match c.op.as_str() {
            ">=" => entry.0 = Some(entry.0.map_or(c.c, |lo: f64| lo.max(c.c))),
            "<" => entry.1 = Some(entry.1.map_or(c.c, |hi: f64| hi.min(c.c))),
            other => {
                return Err(Error::InvalidConfig(format!("unknown operator {other:?}")));
            }
        }
    }
    let conditions: Vec<Condition> = by_feature
        .into_iter()
        .map(|(feature, (lower, upper))| Condition {
            feature,
            lower,
            upper,
        })
        .collect();
    if conditions.is_empty() {
        return Err(Error::InvalidConfig("rule has no conditions".into()));
    }
    if conditions.len() != record.depth {
        return Err(Error::InvalidConfig(format!(
            "depth {} does not match {} merged conditions",
            record.depth,
            conditions.len()
        )));
    }
    if !(record.support > 0.0 && record.support < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "support {} outside (0,1)",
            record.support
        )));
    }
    if record.scale <= 0.0 || !record.scale.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "scale {} must be positive",
            record.scale
        )));
    }
    Ok(Rule {
        conditions,
        support: record.support,
        depth: record.depth,
        scale: record.scale,
    })
}

/// One JSON object per line, in the record layout of [`rule_to_record`].
pub fn write_rules_jsonl(rules: &[Rule], path: &Path) -> Result<()> {
    let mut out = String::new();
    for rule in rules {
        out.push_str(&serde_json::to_string(&rule_to_record(rule))?);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Inverse of [`write_rules_jsonl`].
pub fn read_rules_jsonl(path: &Path) -> Result<Vec<Rule>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut rules = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: RuleJson = serde_json::from_str(line)?;
        rules.push(rule_from_record(&record).map_err(|e| match e {
            Error::InvalidConfig(msg) => {
                Error::InvalidConfig(format!("rule line {}: {msg}", line_no + 1))
            }
            other => other,
        })?);
    }
    Ok(rules)
}
