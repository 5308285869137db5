//! Gibbs sampler for the split-shrinkage horseshoe linear model.
//!
//! The model regresses a centered outcome on binary rule columns and
//! centered linear columns. Rule and linear coefficients share an overall
//! scale but carry separate group scales (tau_R for rules, tau_L for linear
//! terms) plus per-term local scales, each with the usual half-Cauchy prior
//! realized through nested inverse-gamma auxiliaries. Rule coefficients are
//! additionally premultiplied by fixed per-rule scales A_k supplied by the
//! rule generator.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, StreamKind};
use crate::stats;

/// Default chain length and burn-in for full runs.
pub const DEFAULT_TOTAL_ITERS: usize = 22_000;
pub const DEFAULT_BURN_IN: usize = 2_000;

/// Shortened chain used by the fast mode.
pub const FAST_TOTAL_ITERS: usize = 2_000;
pub const FAST_BURN_IN: usize = 500;

/// Floor applied to inverse-gamma rates and variance denominators so
/// underflow cannot produce zero or infinite draws.
const RATE_FLOOR: f64 = 1e-300;

/// Fixed design of one sampling problem: rule columns, linear columns, and
/// the centered outcome.
#[derive(Clone, Debug)]
pub struct DesignMatrices {
    /// n x (q + p), rule columns first.
    x: DMatrix<f64>,
    q: usize,
    p: usize,
    y: DVector<f64>,
    rule_scales: Vec<f64>,
}

impl DesignMatrices {
    /// Assemble and validate a design. Rule columns must be 0/1, linear
    /// columns must be centered, and at least one column must exist.
    pub fn new(
        rule_columns: Vec<Vec<f64>>,
        linear_columns: Vec<Vec<f64>>,
        y_centered: Vec<f64>,
        rule_scales: Vec<f64>,
    ) -> Result<Self> {
        let q = rule_columns.len();
        let p = linear_columns.len();
        let n = y_centered.len();
        if q + p == 0 {
            return Err(Error::InvalidConfig("design has no columns".into()));
        }
        if n == 0 {
            return Err(Error::InsufficientData("design has no rows".into()));
        }
        if rule_scales.len() != q {
            return Err(Error::InvalidConfig(format!(
                "{q} rule columns but {} scales",
                rule_scales.len()
            )));
        }
        if rule_scales.iter().any(|&a| a <= 0.0 || !a.is_finite()) {
            return Err(Error::InvalidConfig("rule scales must be positive".into()));
        }
        for (k, col) in rule_columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::InvalidConfig(format!("rule column {k} length mismatch")));
            }
            if col.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "rule column {k} has entries outside {{0,1}}"
                )));
            }
        }
        for (j, col) in linear_columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::InvalidConfig(format!("linear column {j} length mismatch")));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "linear column {j} has non-finite entries"
                )));
            }
            let mean = stats::mean(col);
            let scale = col.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            if mean.abs() > 1e-10 * scale {
                return Err(Error::InvalidConfig(format!(
                    "linear column {j} is not centered (mean {mean:.3e})"
                )));
            }
        }
        if y_centered.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("outcome has non-finite entries".into()));
        }
        let x = DMatrix::from_fn(n, q + p, |i, c| {
            if c < q {
                rule_columns[c][i]
            } else {
                linear_columns[c - q][i]
            }
        });
        Ok(DesignMatrices {
            x,
            q,
            p,
            y: DVector::from_vec(y_centered),
            rule_scales,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn rule_scales(&self) -> &[f64] {
        &self.rule_scales
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub total_iters: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Multiplier on the prior scale of every linear coefficient; 1 keeps
    /// the symmetric prior, larger values relax linear-term shrinkage.
    pub linear_relax_factor: f64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            total_iters: DEFAULT_TOTAL_ITERS,
            burn_in: DEFAULT_BURN_IN,
            seed: 0,
            linear_relax_factor: 1.0,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_iters <= self.burn_in {
            return Err(Error::InvalidConfig(format!(
                "total iterations ({}) must exceed burn-in ({})",
                self.total_iters, self.burn_in
            )));
        }
        if self.linear_relax_factor <= 0.0 || !self.linear_relax_factor.is_finite() {
            return Err(Error::InvalidConfig(
                "linear relaxation factor must be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

/// Post-burn-in draws of the quantities needed downstream.
#[derive(Clone, Debug)]
pub struct PosteriorDraws {
    /// kept x q rule coefficients.
    a: DMatrix<f64>,
    /// kept x p linear coefficients.
    b: DMatrix<f64>,
    sigma2: Vec<f64>,
    tau: Vec<f64>,
    tau_l: Vec<f64>,
    tau_r: Vec<f64>,
    total_iters: usize,
    burn_in: usize,
    seed: u64,
}

impl PosteriorDraws {
    pub fn n_retained(&self) -> usize {
        self.sigma2.len()
    }

    pub fn q(&self) -> usize {
        self.a.ncols()
    }

    pub fn p(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn tau_l(&self) -> &[f64] {
        &self.tau_l
    }

    pub fn tau_r(&self) -> &[f64] {
        &self.tau_r
    }

    pub fn total_iters(&self) -> usize {
        self.total_iters
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn a_mean(&self) -> Vec<f64> {
        column_means(&self.a)
    }

    pub fn b_mean(&self) -> Vec<f64> {
        column_means(&self.b)
    }

    /// One row per retained iteration, full-precision decimal text.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let mut header: Vec<String> = Vec::new();
        header.extend((1..=self.q()).map(|k| format!("a_{k}")));
        header.extend((1..=self.p()).map(|j| format!("b_{j}")));
        header.extend(["sigma2", "tau", "tau_L", "tau_R"].map(String::from));
        out.push_str(&header.join(","));
        out.push('\n');
        for s in 0..self.n_retained() {
            for k in 0..self.q() {
                let _ = write!(out, "{},", self.a[(s, k)]);
            }
            for j in 0..self.p() {
                let _ = write!(out, "{},", self.b[(s, j)]);
            }
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.sigma2[s], self.tau[s], self.tau_l[s], self.tau_r[s]
            );
        }
        std::fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    /// Inverse of [`write_csv`]. Chain provenance (iteration counts, seed)
    /// is not stored in the CSV; the result reports the retained count as
    /// its total with zero burn-in.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::InvalidConfig("draws file is empty".into()))?
            .split(',')
            .collect();
        let q = header.iter().take_while(|h| h.starts_with("a_")).count();
        let p = header[q..].iter().take_while(|h| h.starts_with("b_")).count();
        if header.len() != q + p + 4 || header[q + p..] != ["sigma2", "tau", "tau_L", "tau_R"] {
            return Err(Error::InvalidConfig("unrecognized draws header".into()));
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidConfig(format!("draws row {i}: {e}")))?;
            if fields.len() != header.len() {
                return Err(Error::RaggedRow {
                    row: i,
                    expected: header.len(),
                    found: fields.len(),
                });
            }
            rows.push(fields);
        }
        if rows.is_empty() {
            return Err(Error::InsufficientData("draws file has no rows".into()));
        }
        let kept = rows.len();
        Ok(PosteriorDraws {
            a: DMatrix::from_fn(kept, q, |s, k| rows[s][k]),
            b: DMatrix::from_fn(kept, p, |s, j| rows[s][q + j]),
            sigma2: rows.iter().map(|r| r[q + p]).collect(),
            tau: rows.iter().map(|r| r[q + p + 1]).collect(),
            tau_l: rows.iter().map(|r| r[q + p + 2]).collect(),
            tau_r: rows.iter().map(|r| r[q + p + 3]).collect(),
            total_iters: kept,
            burn_in: 0,
            seed: 0,
        })
    }
}

fn column_means(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows().max(1) as f64;
    (0..m.ncols()).map(|c| m.column(c).sum() / n).collect()
}

/// Mean, spread, and equal-tailed credible interval of one coefficient.
#[derive(Clone, Copy, Debug)]
pub struct SummaryStat {
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug)]
pub struct CoefficientSummary {
    pub rules: Vec<SummaryStat>,
    pub linear: Vec<SummaryStat>,
}

/// Per-coefficient posterior mean, sample sd, and equal-tailed interval at
/// level alpha, using the shared quantile interpolation.
pub fn posterior_summary(draws: &PosteriorDraws, alpha: f64) -> Result<CoefficientSummary> {
    if draws.n_retained() < 2 {
        return Err(Error::InsufficientData(
            "posterior summary needs at least 2 retained draws".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let summarize = |col: Vec<f64>| {
        let (lower, upper) = stats::equal_tailed_interval(&col, alpha);
        SummaryStat {
            mean: stats::mean(&col),
            sd: stats::sd_sample(&col),
            lower,
            upper,
        }
    };
    Ok(CoefficientSummary {
        rules: (0..draws.q())
            .map(|k| summarize(draws.a.column(k).iter().copied().collect()))
            .collect(),
        linear: (0..draws.p())
            .map(|j| summarize(draws.b.column(j).iter().copied().collect()))
            .collect(),
    })
}

/// Inverse-gamma draw with the given shape and rate, realized as
/// rate / Gamma(shape, scale 1). Consuming randomness that depends only on
/// the shape keeps chains scale-equivariant in the outcome.
pub fn ig_draw(shape: f64, rate: f64, rng: &mut ChaCha8Rng) -> f64 {
    let rate = rate.max(RATE_FLOOR);
    let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
    rate / g.max(RATE_FLOOR)
}

fn floor_denom(x: f64) -> f64 {
    x.max(RATE_FLOOR)
}

/// Exact draw from Normal(Sigma X'y, sigma2 Sigma) with
/// Sigma = (X'X + Lambda^-1)^-1 and Lambda the given positive diagonal.
///
/// Two algebraically equivalent routes keep the cost at
/// O(nP min(n, P)): a Cholesky factorization of the P x P posterior
/// precision when P <= n, and an auxiliary-variable construction solving an
/// n x n system when P > n. A failed factorization is retried once with a
/// small diagonal jitter before reporting a singular design.
pub fn coefficient_sampler(
    x: &DMatrix<f64>,
    xtx: &DMatrix<f64>,
    xty: &DVector<f64>,
    y: &DVector<f64>,
    lambda: &[f64],
    sigma2: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DVector<f64>> {
    let n = x.nrows();
    let p_dim = lambda.len();
    debug_assert_eq!(x.ncols(), p_dim);
    let sigma = sigma2.sqrt();
    if p_dim <= n {
        let mut precision = xtx.clone();
        for i in 0..p_dim {
            precision[(i, i)] += 1.0 / floor_denom(lambda[i]);
        }
        let chol = cholesky_with_jitter(precision)?;
        let mean = chol.solve(xty);
        let z = DVector::from_fn(p_dim, |_, _| StandardNormal.sample(rng));
        // Covariance sigma2 (L L')^-1 comes from solving L' w = z.
        let w = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or(Error::SingularDesign)?;
        Ok(mean + w * sigma)
    } else {
        // u ~ N(0, sigma2 Lambda), delta ~ N(0, I_n), v = X u / sigma + delta;
        // solving (X Lambda X' + I) w = y / sigma - v and setting
        // beta = u + sigma Lambda X' w yields the target distribution.
        let u = DVector::from_fn(p_dim, |i, _| {
            let z: f64 = StandardNormal.sample(rng);
            sigma * lambda[i].sqrt() * z
        });
        let delta = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let v = (x * &u) / sigma + delta;
        let mut x_scaled = x.clone();
        for (i, &l) in lambda.iter().enumerate() {
            x_scaled.column_mut(i).scale_mut(l);
        }
        let mut m = &x_scaled * x.transpose();
        for i in 0..n {
            m[(i, i)] += 1.0;
        }
        let chol = cholesky_with_jitter(m)?;
        let w = chol.solve(&(y / sigma - v));
        let xtw = x.tr_mul(&w);
        let correction = DVector::from_fn(p_dim, |i, _| sigma * lambda[i] * xtw[i]);
        Ok(u + correction)
    }
}

fn cholesky_with_jitter(m: DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let dim = m.nrows();
    match nalgebra::Cholesky::new(m.clone()) {
        Some(c) => Ok(c),
        None => {
            let mean_diag = m.diagonal().sum() / dim as f64;
            let mut jittered = m;
            for i in 0..dim {
                jittered[(i, i)] += 1e-10 * mean_diag.max(1.0);
            }
            nalgebra::Cholesky::new(jittered).ok_or(Error::SingularDesign)
        }
    }
}

struct GibbsState {
    beta: DVector<f64>,
    sigma2: f64,
    tau2: f64,
    tau_l2: f64,
    tau_r2: f64,
    lambda2: Vec<f64>,
    gamma2: Vec<f64>,
    xi: f64,
    xi_l: f64,
    xi_r: f64,
    eta: Vec<f64>,
    nu: Vec<f64>,
}

impl GibbsState {
    fn check_finite(&self, iter: usize) -> Result<()> {
        let positive = |v: f64, name: &str| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::ChainDivergence {
                    iter,
                    quantity: name.to_string(),
                })
            }
        };
        if self.beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::ChainDivergence {
                iter,
                quantity: "coefficients".to_string(),
            });
        }
        positive(self.sigma2, "sigma2")?;
        positive(self.tau2, "tau2")?;
        positive(self.tau_l2, "tau_L2")?;
        positive(self.tau_r2, "tau_R2")?;
        for (k, &v) in self.lambda2.iter().enumerate() {
            positive(v, &format!("lambda2[{k}]"))?;
        }
        for (j, &v) in self.gamma2.iter().enumerate() {
            positive(v, &format!("gamma2[{j}]"))?;
        }
        Ok(())
    }
}

/// Run the Gibbs sampler and return post-burn-in draws.
///
/// Every full conditional is sampled once per iteration in a fixed order:
/// the joint coefficient vector, then local scales and their auxiliaries
/// (rules before linear terms), the two group scales, the overall scale,
/// and finally the noise variance. With q = 0 the rule blocks including
/// tau_R are skipped without consuming randomness, which reduces the chain
/// to a plain horseshoe whose global scale is the product tau tau_L; p = 0
/// symmetrically skips the linear blocks.
pub fn gibbs_fit(dm: &DesignMatrices, cfg: &GibbsConfig) -> Result<PosteriorDraws> {
    gibbs_fit_on_stream(dm, cfg, StreamKind::Gibbs)
}

/// Like [`gibbs_fit`] but drawing from the given stream of the run seed, so
/// auxiliary fits (for example residualization) never share randomness with
/// the main chain.
pub(crate) fn gibbs_fit_on_stream(
    dm: &DesignMatrices,
    cfg: &GibbsConfig,
    kind: StreamKind,
) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let n = dm.n();
    let q = dm.q();
    let p = dm.p();
    let total = q + p;
    let x = dm.x();
    let y = dm.y();
    let xtx = x.tr_mul(x);
    let xty = x.tr_mul(y);
    let scale2: Vec<f64> = dm.rule_scales.iter().map(|a| a * a).collect();
    let c2 = cfg.linear_relax_factor * cfg.linear_relax_factor;

    let y_var = stats::variance(y.as_slice());
    let mut state = GibbsState {
        beta: DVector::zeros(total),
        sigma2: if y_var > 0.0 { y_var } else { 1.0 },
        tau2: 1.0,
        tau_l2: 1.0,
        tau_r2: 1.0,
        lambda2: vec![1.0; q],
        gamma2: vec![1.0; p],
        xi: 1.0,
        xi_l: 1.0,
        xi_r: 1.0,
        eta: vec![1.0; q],
        nu: vec![1.0; p],
    };

    let kept = cfg.total_iters - cfg.burn_in;
    let mut a_draws = DMatrix::zeros(kept, q);
    let mut b_draws = DMatrix::zeros(kept, p);
    let mut sigma2_draws = Vec::with_capacity(kept);
    let mut tau_draws = Vec::with_capacity(kept);
    let mut tau_l_draws = Vec::with_capacity(kept);
    let mut tau_r_draws = Vec::with_capacity(kept);

    let mut rng = stream(cfg.seed, kind, 0);
    let mut lambda_diag = vec![0.0; total];
    for iter in 0..cfg.total_iters {
        for k in 0..q {
            lambda_diag[k] = state.tau2 * state.tau_r2 * state.lambda2[k] * scale2[k];
        }
        for j in 0..p {
            lambda_diag[q + j] = state.tau2 * state.tau_l2 * state.gamma2[j] * c2;
        }
        state.beta = coefficient_sampler(x, &xtx, &xty, y, &lambda_diag, state.sigma2, &mut rng)?;
        let a = state.beta.rows(0, q);
        let b = state.beta.rows(q, p);

        for k in 0..q {
            let rate = 1.0 / state.eta[k]
                + a[k] * a[k]
                    / floor_denom(2.0 * scale2[k] * state.tau2 * state.tau_r2 * state.sigma2);
            state.lambda2[k] = ig_draw(1.0, rate, &mut rng);
        }
        for k in 0..q {
            state.eta[k] = ig_draw(1.0, 1.0 + 1.0 / state.lambda2[k], &mut rng);
        }
        for j in 0..p {
            let rate = 1.0 / state.nu[j]
                + b[j] * b[j]
                    / floor_denom(2.0 * c2 * state.tau2 * state.tau_l2 * state.sigma2);
            state.gamma2[j] = ig_draw(1.0, rate, &mut rng);
        }
        for j in 0..p {
            state.nu[j] = ig_draw(1.0, 1.0 + 1.0 / state.gamma2[j], &mut rng);
        }
        if q > 0 {
            let mut rate = 1.0 / state.xi_r;
            for k in 0..q {
                rate += a[k] * a[k]
                    / floor_denom(
                        2.0 * scale2[k] * state.lambda2[k] * state.tau2 * state.sigma2,
                    );
            }
            state.tau_r2 = ig_draw((q as f64 + 1.0) / 2.0, rate, &mut rng);
            state.xi_r = ig_draw(1.0, 1.0 + 1.0 / state.tau_r2, &mut rng);
        }
        if p > 0 {
            let mut rate = 1.0 / state.xi_l;
            for j in 0..p {
                rate += b[j] * b[j]
                    / floor_denom(2.0 * c2 * state.gamma2[j] * state.tau2 * state.sigma2);
            }
            state.tau_l2 = ig_draw((p as f64 + 1.0) / 2.0, rate, &mut rng);
            state.xi_l = ig_draw(1.0, 1.0 + 1.0 / state.tau_l2, &mut rng);
        }
        {
            let mut rate = 1.0 / state.xi;
            for k in 0..q {
                rate += a[k] * a[k]
                    / floor_denom(
                        2.0 * scale2[k] * state.lambda2[k] * state.tau_r2 * state.sigma2,
                    );
            }
            for j in 0..p {
                rate += b[j] * b[j]
                    / floor_denom(2.0 * c2 * state.gamma2[j] * state.tau_l2 * state.sigma2);
            }
            state.tau2 = ig_draw((total as f64 + 1.0) / 2.0, rate, &mut rng);
            state.xi = ig_draw(1.0, 1.0 + 1.0 / state.tau2, &mut rng);
        }
        {
            let residual = y - x * &state.beta;
            let mut rate = residual.norm_squared() / 2.0;
            for k in 0..q {
                rate += a[k] * a[k]
                    / floor_denom(
                        2.0 * scale2[k] * state.tau2 * state.tau_r2 * state.lambda2[k],
                    );
            }
            for j in 0..p {
                rate += b[j] * b[j]
                    / floor_denom(2.0 * c2 * state.tau2 * state.tau_l2 * state.gamma2[j]);
            }
            state.sigma2 = ig_draw((n as f64 + total as f64) / 2.0, rate, &mut rng);
        }
        state.check_finite(iter)?;

        if iter >= cfg.burn_in {
            let s = iter - cfg.burn_in;
            for k in 0..q {
                a_draws[(s, k)] = state.beta[k];
            }
            for j in 0..p {
                b_draws[(s, j)] = state.beta[q + j];
            }
            sigma2_draws.push(state.sigma2);
            tau_draws.push(state.tau2.sqrt());
            tau_l_draws.push(state.tau_l2.sqrt());
            tau_r_draws.push(state.tau_r2.sqrt());
        }
    }

    Ok(PosteriorDraws {
        a: a_draws,
        b: b_draws,
        sigma2: sigma2_draws,
        tau: tau_draws,
        tau_l: tau_l_draws,
        tau_r: tau_r_draws,
        total_iters: cfg.total_iters,
        burn_in: cfg.burn_in,
        seed: cfg.seed,
    })
}
