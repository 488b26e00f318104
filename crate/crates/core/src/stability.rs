//! L2 stability test for the forecast coefficient functions and its multiplier bootstrap.
//!
//! The statistic is `T = sum_j int (phi_j(t) - mean phi_j)^2 dt` over the lags
//! (`LagsOnly`) or over the intercept and lags (`WithIntercept`). Its null law is
//! approximated by `Phi^T Gamma Phi`, where `Phi` is a Gaussian-multiplier sum of
//! block sums of `x_i * eps_i ⊗ B(i/n)` and
//! `Gamma = Sigma^{-1} P Sigma^{-1}` with `P` the block-centering projection.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::fit::{dot, fit, SieveFit};
use crate::rng::{stream, Domain};
use crate::series::TimeSeries;

/// Minimum number of bootstrap replicates accepted by the test entry points.
pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `H0`: `phi_1, ..., phi_b` constant.
    #[default]
    LagsOnly,
    /// `H0,g`: `phi_0, ..., phi_b` constant.
    WithIntercept,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lags_only" | "lags-only" | "lags" => Ok(Variant::LagsOnly),
            "with_intercept" | "with-intercept" | "all" => Ok(Variant::WithIntercept),
            other => Err(Error::invalid(format!("unknown test variant `{other}`"))),
        }
    }
}

impl Variant {
    fn first_block(self) -> usize {
        match self {
            Variant::LagsOnly => 1,
            Variant::WithIntercept => 0,
        }
    }
}

/// Bootstrap settings shared by the stability and PACF tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    /// Block (window) size `m`.
    pub m: usize,
    /// Number of replicates `B`.
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl BootstrapOptions {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < MIN_REPLICATES {
            return Err(Error::invalid(format!(
                "at least {MIN_REPLICATES} bootstrap replicates are required, got {}",
                self.replicates
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.m == 0 {
            return Err(Error::invalid("block size m must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTestResult {
    /// Observed `n T`.
    pub statistic: f64,
    pub replicates: Vec<f64>,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    /// Empirical `(1 - alpha)` order statistic of the replicates.
    pub critical_value: f64,
    pub variant: Variant,
    pub b: usize,
    pub c: usize,
    pub m: usize,
    pub basis: String,
    pub seed: u64,
}

/// `T` (or `T_g`) by quadrature of the centered squared coefficient functions.
pub fn stat_t(fit: &SieveFit, variant: Variant) -> f64 {
    let basis = fit.basis();
    let mut total = 0.0;
    for j in variant.first_block()..=fit.lags() {
        let block = fit.block(j);
        let mean = fit.coeff_mean(j).expect("lag in range");
        total += basis
            .weights()
            .iter()
            .enumerate()
            .map(|(q, w)| {
                let d = dot(block, basis.node_values(q)) - mean;
                w * d * d
            })
            .sum::<f64>();
    }
    total
}

/// Block-diagonal `P W`: `W = I - B_bar B_bar^T` on each tested block, zero elsewhere.
pub fn centering_projection(b: usize, basis: &Basis, variant: Variant) -> DMatrix<f64> {
    let c = basis.size();
    let w = basis.centering_matrix();
    let mut p = DMatrix::<f64>::zeros((b + 1) * c, (b + 1) * c);
    for j in variant.first_block()..=b {
        p.view_mut((j * c, j * c), (c, c)).copy_from(&w);
    }
    p
}

/// Identity on the trailing lag blocks `b1..=b0`, zero elsewhere.
pub fn trailing_projection(b0: usize, b1: usize, c: usize) -> DMatrix<f64> {
    let p = (b0 + 1) * c;
    let mut m = DMatrix::<f64>::zeros(p, p);
    for k in b1 * c..p {
        m[(k, k)] = 1.0;
    }
    m
}

/// `Sigma_hat^{-1}` via Cholesky.
pub fn sigma_inverse(fit: &SieveFit) -> Result<DMatrix<f64>> {
    fit.sigma_hat()
        .clone()
        .cholesky()
        .map(|ch| ch.inverse())
        .ok_or_else(|| Error::IllConditioned("Sigma_hat is not positive definite".into()))
}

/// `Sigma^{-1} P Sigma^{-1}`, symmetrized.
pub fn gamma_with_projection(sigma_inv: &DMatrix<f64>, projection: &DMatrix<f64>) -> DMatrix<f64> {
    let g = sigma_inv * projection * sigma_inv;
    (&g + g.transpose()) * 0.5
}

/// `Gamma_hat` for the stability statistic of the given variant.
pub fn gamma_hat(fit: &SieveFit, variant: Variant) -> Result<DMatrix<f64>> {
    let inv = sigma_inverse(fit)?;
    let proj = centering_projection(fit.lags(), fit.basis(), variant);
    Ok(gamma_with_projection(&inv, &proj))
}

/// Precomputed multiplier-bootstrap machinery for one fit and window size.
///
/// Row `i` of `rows` is `(sum_{j=i}^{i+m} x_j eps_j) ⊗ B(i/n)` for `i = b+1..=n-m`.
#[derive(Debug, Clone)]
pub struct MultiplierBootstrap {
    rows: DMatrix<f64>,
    scale: f64,
    gamma: DMatrix<f64>,
}

impl MultiplierBootstrap {
    pub fn new(fit: &SieveFit, values: &[f64], m: usize, gamma: DMatrix<f64>) -> Result<Self> {
        let rows = window_rows(fit, values, m)?;
        let (n, b) = (fit.time_scale(), fit.lags());
        let scale = 1.0 / (((n - m - b + 1) * m) as f64).sqrt();
        if gamma.nrows() != rows.ncols() || gamma.ncols() != rows.ncols() {
            return Err(Error::invalid("Gamma dimension does not match the design"));
        }
        Ok(Self { rows, scale, gamma })
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn dimension(&self) -> usize {
        self.rows.ncols()
    }

    pub fn replace_gamma(&mut self, gamma: DMatrix<f64>) {
        self.gamma = gamma;
    }

    /// One draw of `Phi`.
    pub fn draw_phi<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let weights = DVector::<f64>::from_fn(self.rows.nrows(), |_, _| rng.sample(StandardNormal));
        self.rows.tr_mul(&weights) * self.scale
    }

    /// `Phi^T Gamma Phi` for a given `Phi`.
    pub fn quadratic_form(&self, phi: &DVector<f64>) -> f64 {
        quad(&self.gamma, phi)
    }

    /// One replicate `T_hat = Phi^T Gamma Phi` with fresh multipliers.
    pub fn replicate<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let phi = self.draw_phi(rng);
        self.quadratic_form(&phi)
    }

    /// `count` replicates; replicate `r` uses stream `(seed, domain, r)`.
    pub fn replicates(&self, count: usize, seed: u64, domain: Domain) -> Vec<f64> {
        (0..count)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream(seed, domain, r as u64);
                self.replicate(&mut rng)
            })
            .collect()
    }

    /// `count` draws of `Phi`, same stream layout as [`MultiplierBootstrap::replicates`].
    pub fn phi_draws(&self, count: usize, seed: u64, domain: Domain) -> Vec<DVector<f64>> {
        (0..count)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream(seed, domain, r as u64);
                self.draw_phi(&mut rng)
            })
            .collect()
    }

    /// Conditional covariance `E[Phi Phi^T | data]`.
    pub fn omega(&self) -> DMatrix<f64> {
        self.rows.tr_mul(&self.rows) * (self.scale * self.scale)
    }
}

pub(crate) fn quad(gamma: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (gamma * v).dot(v)
}

/// Window-sum rows shared by the bootstrap and the minimum-volatility selector.
pub(crate) fn window_rows(fit: &SieveFit, values: &[f64], m: usize) -> Result<DMatrix<f64>> {
    if fit.horizon() != 1 {
        return Err(Error::invalid("the bootstrap is defined for one-step fits (h = 1)"));
    }
    let n = fit.time_scale();
    if values.len() != n || fit.sample_len() != n {
        return Err(Error::invalid("series does not match the fitted sample"));
    }
    let b = fit.lags();
    if m == 0 {
        return Err(Error::invalid("block size m must be at least 1"));
    }
    if m + b >= n {
        return Err(Error::invalid(format!(
            "block size m = {m} must be below n - b = {}",
            n - b
        )));
    }
    let c = fit.basis_size();
    let dim = b + 1;
    let res = fit.residuals();
    let first = fit.first_index(); // b + 1

    // prefix[r] = sum of h_j over the first r residual indices
    let mut prefix = vec![0.0; (res.len() + 1) * dim];
    for (r, e) in res.iter().enumerate() {
        let i = first + r;
        let (done, rest) = prefix.split_at_mut((r + 1) * dim);
        let prev = &done[r * dim..];
        let cur = &mut rest[..dim];
        cur[0] = prev[0] + e;
        for j in 1..dim {
            cur[j] = prev[j] + values[i - j - 1] * e;
        }
    }

    let count = n - m - b;
    let mut rows = DMatrix::<f64>::zeros(count, dim * c);
    let mut bt = vec![0.0; c];
    let mut win = vec![0.0; dim];
    for r in 0..count {
        let i = first + r;
        fit.basis().eval_into(i as f64 / n as f64, &mut bt);
        // residual offsets r..=r+m
        for (j, w) in win.iter_mut().enumerate() {
            *w = prefix[(r + m + 1) * dim + j] - prefix[r * dim + j];
        }
        for j in 0..dim {
            for k in 0..c {
                rows[(r, j * c + k)] = win[j] * bt[k];
            }
        }
    }
    Ok(rows)
}

/// p-value `1 - B*/B` with `B* = #{T_r <= stat}`, and the order-statistic decision.
pub fn decide(statistic: f64, replicates: &[f64], alpha: f64) -> (f64, bool, f64) {
    let total = replicates.len();
    let mut sorted = replicates.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let below = sorted.partition_point(|v| *v <= statistic);
    let p_value = 1.0 - below as f64 / total as f64;
    let k = ((total as f64) * (1.0 - alpha)).floor() as usize;
    let critical = sorted[k.clamp(1, total) - 1];
    (p_value, statistic > critical, critical)
}

/// Runs the full stability test: fit, statistic, bootstrap, decision.
pub fn stability_test(
    ts: &TimeSeries,
    b: usize,
    basis: &Basis,
    options: BootstrapOptions,
    variant: Variant,
) -> Result<StabilityTestResult> {
    options.validate()?;
    if basis.size() < 2 {
        return Err(Error::invalid(
            "the stability test needs at least two basis functions (c >= 2)",
        ));
    }
    let f = fit(ts, b, basis, 1)?;
    stability_test_from_fit(&f, ts, options, variant)
}

/// Stability test for an existing one-step fit of `ts`.
pub fn stability_test_from_fit(
    fit: &SieveFit,
    ts: &TimeSeries,
    options: BootstrapOptions,
    variant: Variant,
) -> Result<StabilityTestResult> {
    options.validate()?;
    let statistic = ts.len() as f64 * stat_t(fit, variant);
    let gamma = gamma_hat(fit, variant)?;
    let boot = MultiplierBootstrap::new(fit, ts.values(), options.m, gamma)?;
    let replicates = boot.replicates(options.replicates, options.seed, Domain::Bootstrap);
    if replicates.iter().any(|v| !v.is_finite()) || !statistic.is_finite() {
        return Err(Error::Numerical("non-finite bootstrap statistic".into()));
    }
    let (p_value, reject, critical_value) = decide(statistic, &replicates, options.alpha);
    Ok(StabilityTestResult {
        statistic,
        replicates,
        p_value,
        alpha: options.alpha,
        reject,
        critical_value,
        variant,
        b: fit.lags(),
        c: fit.basis_size(),
        m: options.m,
        basis: fit.basis().label(),
        seed: options.seed,
    })
}

/// One bootstrap replicate for the stability statistic (lags-only variant).
pub fn bootstrap_replicate<R: Rng + ?Sized>(
    fit: &SieveFit,
    ts: &TimeSeries,
    m: usize,
    rng: &mut R,
) -> Result<f64> {
    let gamma = gamma_hat(fit, Variant::LagsOnly)?;
    Ok(MultiplierBootstrap::new(fit, ts.values(), m, gamma)?.replicate(rng))
}
