//! Brute-force Shapley values by direct subset enumeration. This is the
//! independent reference the closed-form estimators are verified against,
//! so it deliberately shares no code with them: every interventional
//! expectation is estimated by a sample mean over the data with the
//! coalition's coordinates pinned to the probe, and the coalition sums run
//! over all subsets of all dataset columns.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rulegen::Rule;

use super::binom::binomial;

/// Widest dataset the enumeration accepts; 2^12 coalitions per probe.
pub const ENUMERATION_LIMIT: usize = 12;

fn check_enumerable(data: &Dataset, x: &[f64]) -> Result<()> {
    if data.p() > ENUMERATION_LIMIT {
        return Err(Error::InvalidConfig(format!(
            "brute-force enumeration over {} features exceeds the limit of {ENUMERATION_LIMIT}",
            data.p()
        )));
    }
    if x.len() != data.p() {
        return Err(Error::InvalidConfig(format!(
            "probe has {} entries for a {}-column dataset",
            x.len(),
            data.p()
        )));
    }
    Ok(())
}

/// v(S) for every coalition S, indexed by column bitmask: the sample mean
/// of coeff * r with coordinates in S overridden by the probe's values.
fn interventional_means(rule: &Rule, coeff: f64, data: &Dataset, x: &[f64]) -> Vec<f64> {
    let n = data.n();
    (0..1usize << data.p())
        .map(|mask| {
            let mut satisfied = 0u64;
            for t in 0..n {
                let inside = rule.conditions.iter().all(|c| {
                    let value = if mask & (1 << c.feature) != 0 {
                        x[c.feature]
                    } else {
                        data.value(t, c.feature)
                    };
                    c.matches(value)
                });
                satisfied += u64::from(inside);
            }
            coeff * satisfied as f64 / n as f64
        })
        .collect()
}

/// Marginal Shapley values of coeff * r at the probe, one per dataset
/// column: phi_j = sum over coalitions S not containing j of
/// (v(S + j) - v(S)) / (p * C(p-1, |S|)).
pub fn brute_force_marginal(
    rule: &Rule,
    coeff: f64,
    data: &Dataset,
    x: &[f64],
) -> Result<Vec<f64>> {
    check_enumerable(data, x)?;
    let p = data.p();
    let v = interventional_means(rule, coeff, data, x);
    let mut phi = vec![0.0; p];
    for (j, slot) in phi.iter_mut().enumerate() {
        let bit = 1usize << j;
        let mut acc = 0.0;
        for mask in 0..1usize << p {
            if mask & bit != 0 {
                continue;
            }
            let size = mask.count_ones() as u64;
            let weight = 1.0 / (p as f64 * binomial(p as u64 - 1, size) as f64);
            acc += weight * (v[mask | bit] - v[mask]);
        }
        *slot = acc;
    }
    Ok(phi)
}

/// Pairwise-interaction Shapley value of coeff * r at the probe:
/// the four-term contrast v(S+j+j') - v(S+j) - v(S+j') + v(S) summed over
/// coalitions S avoiding both, weighted by 1 / ((p-1) * C(p-2, |S|)).
pub fn brute_force_interaction(
    rule: &Rule,
    coeff: f64,
    data: &Dataset,
    x: &[f64],
    j: usize,
    jp: usize,
) -> Result<f64> {
    check_enumerable(data, x)?;
    let p = data.p();
    if j >= p || jp >= p || j == jp {
        return Err(Error::InvalidConfig(format!(
            "interaction needs two distinct columns below {p}, got ({j}, {jp})"
        )));
    }
    let v = interventional_means(rule, coeff, data, x);
    let (bj, bjp) = (1usize << j, 1usize << jp);
    let mut acc = 0.0;
    for mask in 0..1usize << p {
        if mask & (bj | bjp) != 0 {
            continue;
        }
        let size = mask.count_ones() as u64;
        let weight = 1.0 / ((p as f64 - 1.0) * binomial(p as u64 - 2, size) as f64);
        acc += weight * (v[mask | bj | bjp] - v[mask | bj] - v[mask | bjp] + v[mask]);
    }
    Ok(acc)
}
