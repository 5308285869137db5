//! Exact interventional Shapley values for rule and linear terms.
//!
//! A 0/1 rule is a product of per-feature conditions, which collapses the
//! exponential coalition sums into a single pass over the data: each row
//! contributes through a binomial coefficient determined by how many of the
//! rule's conditions it satisfies. The estimators here evaluate those
//! closed forms per feature (marginal) and per feature pair (interaction);
//! [`oracle`] re-derives the same quantities by brute-force subset
//! enumeration so the two routes can be asserted against each other.
//!
//! [`model_shapley`] repeats the per-term attribution for every retained
//! posterior draw and probe row, producing the [`ShapleyCube`] that
//! downstream reports summarize.

pub mod binom;
pub mod oracle;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dataset::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::horseshoe::PosteriorDraws;
use crate::model::FittedModel;
use crate::rulegen::Rule;
use crate::stats;

use binom::binomial;

/// A rule restricted to the features it actually tests. Features outside
/// the rule are null players with exactly zero attribution, so the
/// estimators run over this view with the player count equal to the rule
/// depth. Rows collapse into 2^depth classes by which conditions they
/// satisfy; the kernels only ever need the class counts.
#[derive(Clone, Debug)]
pub struct ReducedRuleView {
    conditions: Vec<crate::rulegen::Condition>,
    /// Column indices of the conditions, ascending.
    involved: Vec<usize>,
    /// Per data row, bit k set when condition k holds.
    row_masks: Vec<u8>,
    /// Rows per satisfied-condition pattern, indexed by bitmask.
    class_counts: Vec<u64>,
    n: usize,
}

impl ReducedRuleView {
    pub fn new(rule: &Rule, data: &Dataset) -> Self {
        let involved: Vec<usize> = rule.conditions.iter().map(|c| c.feature).collect();
        let p_r = involved.len();
        assert!((1..=8).contains(&p_r), "rule depth {p_r} outside 1..=8");
        debug_assert!(involved.windows(2).all(|w| w[0] < w[1]));
        let mut row_masks = Vec::with_capacity(data.n());
        let mut class_counts = vec![0u64; 1 << p_r];
        for t in 0..data.n() {
            let mut mask = 0u8;
            for (k, c) in rule.conditions.iter().enumerate() {
                if c.matches(data.value(t, c.feature)) {
                    mask |= 1 << k;
                }
            }
            row_masks.push(mask);
            class_counts[mask as usize] += 1;
        }
        ReducedRuleView {
            conditions: rule.conditions.clone(),
            involved,
            row_masks,
            class_counts,
            n: data.n(),
        }
    }

    pub fn p_r(&self) -> usize {
        self.involved.len()
    }

    pub fn involved(&self) -> &[usize] {
        &self.involved
    }

    pub fn row_masks(&self) -> &[u8] {
        &self.row_masks
    }

    /// Number of the rule's conditions row t satisfies.
    pub fn q(&self, t: usize) -> u32 {
        self.row_masks[t].count_ones()
    }

    pub fn class_counts(&self) -> &[u64] {
        &self.class_counts
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Fraction of rows satisfying the whole rule.
    pub fn support(&self) -> f64 {
        *self.class_counts.last().unwrap() as f64 / self.n as f64
    }

    pub fn local_index(&self, column: usize) -> Option<usize> {
        self.involved.binary_search(&column).ok()
    }

    /// Satisfied-condition pattern of an arbitrary point.
    pub fn probe_mask(&self, x: &[f64]) -> u8 {
        let mut mask = 0u8;
        for (k, c) in self.conditions.iter().enumerate() {
            if c.matches(x[c.feature]) {
                mask |= 1 << k;
            }
        }
        mask
    }

    /// Marginal kernel at a probe pattern: per involved feature, the
    /// attribution of the rule with unit coefficient. Only rows satisfying
    /// every condition that the probe fails can contribute; each enters
    /// through one exact binomial coefficient.
    pub fn marginal_kernel(&self, probe: u8) -> Vec<f64> {
        let p_r = self.p_r() as i64;
        let full = (1usize << self.p_r()) - 1;
        let q_star = i64::from(probe.count_ones());
        let mut out = vec![0.0; self.p_r()];
        for (j, slot) in out.iter_mut().enumerate() {
            let r_star = i64::from(probe >> j & 1);
            let prefactor = p_r - q_star + r_star;
            let mut acc = 0.0;
            for (class, &count) in self.class_counts.iter().enumerate() {
                if count == 0 || class | probe as usize != full {
                    continue;
                }
                let r_t = (class as i64 >> j) & 1;
                if r_t == r_star {
                    continue;
                }
                let q_t = i64::from((class as u32).count_ones());
                let top = 2 * p_r - q_star - q_t - 1 + r_star + r_t;
                acc += count as f64 * (r_star - r_t) as f64
                    / binomial(top as u64, prefactor as u64) as f64;
            }
            *slot = acc / (self.n as f64 * prefactor as f64);
        }
        out
    }

    /// Interaction kernel at a probe pattern for the local feature pair
    /// (j, jp), unit coefficient; symmetric in its arguments bit for bit.
    /// The four-term contrast of the interaction game factors into
    /// (R_j* - R_j(t)) (R_jp* - R_jp(t)), so only rows flipping both
    /// features relative to the probe contribute. The binomial's lower
    /// index equals the prefactor count: one larger would degenerate to
    /// C(1, 2) = 0 on exactly those contributing rows.
    pub fn interaction_kernel(&self, probe: u8, j: usize, jp: usize) -> f64 {
        assert_ne!(j, jp, "interaction needs two distinct local features");
        let p_r = self.p_r() as i64;
        let full = (1usize << self.p_r()) - 1;
        let q_star = i64::from(probe.count_ones());
        let rj_star = i64::from(probe >> j & 1);
        let rjp_star = i64::from(probe >> jp & 1);
        let prefactor = p_r - 1 - q_star + rj_star + rjp_star;
        debug_assert!(prefactor >= 1);
        let mut acc = 0.0;
        for (class, &count) in self.class_counts.iter().enumerate() {
            if count == 0 || class | probe as usize != full {
                continue;
            }
            let rj_t = (class as i64 >> j) & 1;
            let rjp_t = (class as i64 >> jp) & 1;
            let contrast = (rj_star - rj_t) * (rjp_star - rjp_t);
            if contrast == 0 {
                continue;
            }
            let q_t = i64::from((class as u32).count_ones());
            let top = 2 * p_r - q_star - q_t + rj_star + rjp_star + rj_t + rjp_t - 3;
            acc += count as f64 * contrast as f64
                / binomial(top as u64, prefactor as u64) as f64;
        }
        acc / (self.n as f64 * prefactor as f64)
    }
}

/// Marginal attributions of coeff * r at the probe, one per dataset column;
/// columns the rule does not test get exactly zero.
pub fn rule_shapley(rule: &Rule, coeff: f64, data: &Dataset, x: &[f64]) -> Vec<f64> {
    let view = ReducedRuleView::new(rule, data);
    let kernel = view.marginal_kernel(view.probe_mask(x));
    let mut out = vec![0.0; data.p()];
    for (local, &column) in view.involved().iter().enumerate() {
        out[column] = coeff * kernel[local];
    }
    out
}

/// Pairwise-interaction attribution of coeff * r at the probe for dataset
/// columns (j, jp); exactly zero unless the rule tests both.
pub fn rule_interaction_shapley(
    rule: &Rule,
    coeff: f64,
    data: &Dataset,
    x: &[f64],
    j: usize,
    jp: usize,
) -> f64 {
    assert_ne!(j, jp, "interaction needs two distinct columns");
    let view = ReducedRuleView::new(rule, data);
    let (Some(lj), Some(ljp)) = (view.local_index(j), view.local_index(jp)) else {
        return 0.0;
    };
    coeff * view.interaction_kernel(view.probe_mask(x), lj, ljp)
}

/// Attribution of the linear term b x against the background mean:
/// b (x_star - x_bar). Linear terms carry no interactions.
pub fn linear_shapley(b: f64, x_bar: f64, x_star: f64) -> f64 {
    b * (x_star - x_bar)
}

/// A probe that could not be evaluated, and why.
#[derive(Clone, Debug)]
pub struct SkippedProbe {
    pub index: usize,
    pub reason: String,
}

/// Posterior Shapley values over (retained draw, probe row, feature), with
/// interaction slices per feature pair and the per-draw background mean
/// prediction. Dummy columns of one factor are aggregated into a single
/// factor feature; an interaction between two dummies of the same factor
/// lands on that factor's diagonal pair.
///
/// Memory grows as draws x probes x (features + pairs); thin the draws or
/// the probe set before calling [`model_shapley`] at full scale.
#[derive(Clone, Debug)]
pub struct ShapleyCube {
    feature_names: Vec<String>,
    /// Feature-axis pairs (lo, hi) with any rule support, ascending.
    pair_labels: Vec<(usize, usize)>,
    /// Per feature: draws x probes.
    values: Vec<DMatrix<f64>>,
    /// Per pair: draws x probes.
    interactions: Vec<DMatrix<f64>>,
    /// Per draw: mean prediction over the background data.
    base: Vec<f64>,
    skipped: Vec<SkippedProbe>,
    n_probes: usize,
}

impl ShapleyCube {
    pub fn n_draws(&self) -> usize {
        self.base.len()
    }

    pub fn n_probes(&self) -> usize {
        self.n_probes
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn pair_labels(&self) -> &[(usize, usize)] {
        &self.pair_labels
    }

    pub fn value(&self, draw: usize, probe: usize, feature: usize) -> f64 {
        self.values[feature][(draw, probe)]
    }

    /// Interaction value for an unordered feature pair; zero when no rule
    /// supports the pair, identical under argument swap.
    pub fn interaction(&self, draw: usize, probe: usize, f: usize, fp: usize) -> f64 {
        match self.pair_index(f, fp) {
            Some(idx) => self.interactions[idx][(draw, probe)],
            None => 0.0,
        }
    }

    pub fn pair_index(&self, f: usize, fp: usize) -> Option<usize> {
        let key = (f.min(fp), f.max(fp));
        self.pair_labels.binary_search(&key).ok()
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// The draws x probes slice of one feature.
    pub fn feature_matrix(&self, feature: usize) -> &DMatrix<f64> {
        &self.values[feature]
    }

    /// The draws x probes slice of one pair, by position in `pair_labels`.
    pub fn interaction_matrix(&self, pair: usize) -> &DMatrix<f64> {
        &self.interactions[pair]
    }

    pub fn skipped(&self) -> &[SkippedProbe] {
        &self.skipped
    }

    pub fn is_skipped(&self, probe: usize) -> bool {
        self.skipped.binary_search_by_key(&probe, |s| s.index).is_ok()
    }
}

/// One column of the per-feature coefficient/kernel factorization: either a
/// (rule, local feature) slot or a linear term.
enum Term {
    Rule { k: usize, local: usize },
    Linear { idx: usize },
}

struct RulePrep {
    view: ReducedRuleView,
    /// Marginal kernels for every probe pattern: [pattern][local feature].
    marginal: Vec<Vec<f64>>,
    /// Interaction kernels: [pattern][local pair, lexicographic].
    interaction: Vec<Vec<f64>>,
    /// Probe pattern per probe row.
    masks: Vec<u8>,
}

fn local_pairs(p_r: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for u in 0..p_r {
        for v in (u + 1)..p_r {
            pairs.push((u, v));
        }
    }
    pairs
}

/// Map dataset columns to report features: continuous columns stand alone,
/// dummy columns collapse onto one feature per factor (first occurrence
/// fixes the order).
fn feature_axes(names: &[String], kinds: &[ColumnKind]) -> (Vec<String>, Vec<usize>) {
    let mut axis_names: Vec<String> = Vec::new();
    let mut axis_of = Vec::with_capacity(names.len());
    let mut factor_axis: BTreeMap<&str, usize> = BTreeMap::new();
    for (name, kind) in names.iter().zip(kinds) {
        match kind {
            ColumnKind::Continuous => {
                axis_of.push(axis_names.len());
                axis_names.push(name.clone());
            }
            ColumnKind::Dummy { factor, .. } => match factor_axis.get(factor.as_str()) {
                Some(&axis) => axis_of.push(axis),
                None => {
                    factor_axis.insert(factor, axis_names.len());
                    axis_of.push(axis_names.len());
                    axis_names.push(factor.clone());
                }
            },
        }
    }
    (axis_names, axis_of)
}

/// Shapley values of the whole model at every probe, repeated for every
/// retained draw. The interventional background is always `data` (the
/// training rows); the per-draw base value is the mean prediction over it.
/// Probes with non-finite entries are recorded in `skipped` and get
/// all-zero slices.
pub fn model_shapley(
    model: &FittedModel,
    draws: &PosteriorDraws,
    data: &Dataset,
    probes: &[Vec<f64>],
    with_interactions: bool,
) -> Result<ShapleyCube> {
    if draws.n_retained() == 0 {
        return Err(Error::InsufficientData("no retained draws".into()));
    }
    if draws.q() != model.rules.len() {
        return Err(Error::InvalidConfig(format!(
            "{} rule coefficients for {} rules",
            draws.q(),
            model.rules.len()
        )));
    }
    let linear_cols = model.linear_indices();
    if draws.p() != linear_cols.len() {
        return Err(Error::InvalidConfig(format!(
            "{} linear coefficients for {} linear terms",
            draws.p(),
            linear_cols.len()
        )));
    }
    if data.p() != model.n_columns() {
        return Err(Error::InvalidConfig(format!(
            "background data has {} columns, model expects {}",
            data.p(),
            model.n_columns()
        )));
    }
    let mut skipped = Vec::new();
    for (i, probe) in probes.iter().enumerate() {
        if probe.len() != model.n_columns() {
            return Err(Error::InvalidConfig(format!(
                "probe {i} has {} entries, model expects {}",
                probe.len(),
                model.n_columns()
            )));
        }
        if probe.iter().any(|v| !v.is_finite()) {
            skipped.push(SkippedProbe {
                index: i,
                reason: "non-finite feature value".into(),
            });
        }
    }
    let valid: Vec<bool> = {
        let mut flags = vec![true; probes.len()];
        for s in &skipped {
            flags[s.index] = false;
        }
        flags
    };

    let (feature_names, axis_of) = feature_axes(&model.column_names, &model.column_kinds);
    let kept = draws.n_retained();
    let n_probes = probes.len();

    let preps: Vec<RulePrep> = model
        .rules
        .par_iter()
        .map(|rule| {
            let view = ReducedRuleView::new(rule, data);
            let patterns = 1usize << view.p_r();
            let marginal = (0..patterns)
                .map(|m| view.marginal_kernel(m as u8))
                .collect();
            let interaction = if with_interactions && view.p_r() >= 2 {
                let pairs = local_pairs(view.p_r());
                (0..patterns)
                    .map(|m| {
                        pairs
                            .iter()
                            .map(|&(u, v)| view.interaction_kernel(m as u8, u, v))
                            .collect()
                    })
                    .collect()
            } else {
                Vec::new()
            };
            let masks = probes
                .iter()
                .zip(&valid)
                .map(|(x, &ok)| if ok { view.probe_mask(x) } else { 0 })
                .collect();
            RulePrep {
                view,
                marginal,
                interaction,
                masks,
            }
        })
        .collect();

    // Background means: rule supports and linear-column means over `data`.
    let rbar: Vec<f64> = preps.iter().map(|p| p.view.support()).collect();
    let linear_data: Vec<Vec<f64>> = linear_cols
        .iter()
        .map(|&j| {
            data.column(j)
                .iter()
                .map(|&x| model.preprocessing.linear_value(j, x))
                .collect()
        })
        .collect();
    let xbar: Vec<f64> = linear_data.iter().map(|col| stats::mean(col)).collect();
    let linear_probe: Vec<Vec<f64>> = linear_cols
        .iter()
        .map(|&j| {
            probes
                .iter()
                .zip(&valid)
                .map(|(x, &ok)| {
                    if ok {
                        model.preprocessing.linear_value(j, x[j])
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();

    let base_offsets = draws.a() * DVector::from_vec(rbar.clone())
        + draws.b() * DVector::from_vec(xbar.clone());
    let base: Vec<f64> = (0..kept).map(|s| model.intercept + base_offsets[s]).collect();

    let mut axis_terms: Vec<Vec<Term>> = (0..feature_names.len()).map(|_| Vec::new()).collect();
    for (k, prep) in preps.iter().enumerate() {
        for (local, &col) in prep.view.involved().iter().enumerate() {
            axis_terms[axis_of[col]].push(Term::Rule { k, local });
        }
    }
    for (idx, &col) in linear_cols.iter().enumerate() {
        axis_terms[axis_of[col]].push(Term::Linear { idx });
    }

    let values: Vec<DMatrix<f64>> = axis_terms
        .par_iter()
        .map(|terms| {
            if terms.is_empty() {
                return DMatrix::zeros(kept, n_probes);
            }
            let coeffs = DMatrix::from_fn(kept, terms.len(), |s, t| match terms[t] {
                Term::Rule { k, .. } => draws.a()[(s, k)],
                Term::Linear { idx } => draws.b()[(s, idx)],
            });
            let kernels = DMatrix::from_fn(terms.len(), n_probes, |t, i| {
                if !valid[i] {
                    return 0.0;
                }
                match terms[t] {
                    Term::Rule { k, local } => {
                        preps[k].marginal[preps[k].masks[i] as usize][local]
                    }
                    Term::Linear { idx } => linear_probe[idx][i] - xbar[idx],
                }
            });
            coeffs * kernels
        })
        .collect();

    let (pair_labels, interactions) = if with_interactions {
        let mut pair_terms: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
        for (k, prep) in preps.iter().enumerate() {
            for (pos, &(u, v)) in local_pairs(prep.view.p_r()).iter().enumerate() {
                let (fa, fb) = (
                    axis_of[prep.view.involved()[u]],
                    axis_of[prep.view.involved()[v]],
                );
                let key = (fa.min(fb), fa.max(fb));
                pair_terms.entry(key).or_default().push((k, pos));
            }
        }
        let labels: Vec<(usize, usize)> = pair_terms.keys().copied().collect();
        let slices: Vec<DMatrix<f64>> = pair_terms
            .par_iter()
            .map(|(_, terms)| {
                let coeffs =
                    DMatrix::from_fn(kept, terms.len(), |s, t| draws.a()[(s, terms[t].0)]);
                let kernels = DMatrix::from_fn(terms.len(), n_probes, |t, i| {
                    if !valid[i] {
                        return 0.0;
                    }
                    let (k, pos) = terms[t];
                    preps[k].interaction[preps[k].masks[i] as usize][pos]
                });
                coeffs * kernels
            })
            .collect();
        (labels, slices)
    } else {
        (Vec::new(), Vec::new())
    };

    Ok(ShapleyCube {
        feature_names,
        pair_labels,
        values,
        interactions,
        base,
        skipped,
        n_probes,
    })
}
