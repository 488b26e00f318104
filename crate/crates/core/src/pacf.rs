//! Time-varying partial autocorrelation surface and the lag-band nullity test.
//!
//! `rho_j(t)` is the last-lag coefficient function of the order-`j` sieve fit.
//! The test of `rho_{b1} = ... = rho_{b0} = 0` uses the coefficient functions of a
//! single order-`b0` fit through `T_phi = sum_{j=b1}^{b0} int phi_j^2`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::fit::{dot, fit, SieveFit};
use crate::rng::Domain;
use crate::series::TimeSeries;
use crate::stability::{
    decide, gamma_with_projection, quad, sigma_inverse, trailing_projection, BootstrapOptions,
    MultiplierBootstrap,
};

pub const DEFAULT_GRID: usize = 101;
pub const DEFAULT_CAP: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceOptions {
    /// Number of uniform grid points on `[0, 1]`.
    pub grid: usize,
    /// Values with `|rho| > cap` flag the lag as ill-conditioned.
    pub cap: f64,
}

impl Default for SurfaceOptions {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID,
            cap: DEFAULT_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacfLag {
    pub lag: usize,
    /// `rho_j(t_g)` on the grid; `None` if the order-`j` fit failed.
    pub values: Option<Vec<f64>>,
    /// Reason the lag is unreliable or skipped.
    pub flag: Option<String>,
    pub cond_estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacfSurface {
    pub grid: Vec<f64>,
    pub lags: Vec<PacfLag>,
    pub basis: String,
    pub cap: f64,
}

impl PacfSurface {
    /// Values for lag `j` (1-based), if that lag was estimated.
    pub fn lag(&self, j: usize) -> Option<&[f64]> {
        self.lags
            .get(j.checked_sub(1)?)
            .and_then(|l| l.values.as_deref())
    }

    /// Grid average of `rho_j`.
    pub fn mean_lag(&self, j: usize) -> Option<f64> {
        self.lag(j).map(|v| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Grid average of `|rho_j|`.
    pub fn mean_abs_lag(&self, j: usize) -> Option<f64> {
        self.lag(j)
            .map(|v| v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64)
    }

    /// Long-form CSV with columns `lag,t,rho_hat`; skipped lags are omitted.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lag,t,rho_hat\n");
        for l in &self.lags {
            if let Some(values) = &l.values {
                for (t, v) in self.grid.iter().zip(values) {
                    let _ = writeln!(out, "{},{},{}", l.lag, t, v);
                }
            }
        }
        out
    }
}

fn uniform_grid(g: usize) -> Vec<f64> {
    match g {
        1 => vec![0.5],
        _ => (0..g).map(|k| k as f64 / (g - 1) as f64).collect(),
    }
}

/// Last-lag coefficient function of an order-`fit.lags()` fit on `grid`.
pub fn last_lag_curve(fit: &SieveFit, grid: &[f64]) -> Vec<f64> {
    let j = fit.lags();
    let mut bt = vec![0.0; fit.basis_size()];
    grid.iter()
        .map(|t| {
            fit.basis().eval_into(*t, &mut bt);
            dot(fit.block(j), &bt)
        })
        .collect()
}

/// Estimates `rho_j(t)` for `j = 1..=b0` on a uniform grid.
pub fn pacf_surface(
    ts: &TimeSeries,
    b0: usize,
    basis: &Basis,
    options: SurfaceOptions,
) -> Result<PacfSurface> {
    if b0 == 0 {
        return Err(Error::invalid("b0 must be at least 1"));
    }
    if options.grid == 0 {
        return Err(Error::invalid("the PACF grid needs at least one point"));
    }
    if options.cap.is_nan() || options.cap <= 0.0 {
        return Err(Error::invalid("the PACF cap must be positive"));
    }
    // the largest design must be feasible
    crate::design::build_design(ts.values(), b0, basis, 1).map(|_| ())?;
    let grid = uniform_grid(options.grid);
    let lags: Vec<PacfLag> = (1..=b0)
        .into_par_iter()
        .map(|j| match fit(ts, j, basis, 1) {
            Ok(f) => {
                let values = last_lag_curve(&f, &grid);
                let flag = if values.iter().any(|v| !v.is_finite()) {
                    Some("non-finite estimate".to_string())
                } else if values.iter().any(|v| v.abs() > options.cap) {
                    Some(format!("estimate exceeds cap {}", options.cap))
                } else {
                    None
                };
                PacfLag {
                    lag: j,
                    values: Some(values),
                    flag,
                    cond_estimate: Some(f.cond_estimate()),
                }
            }
            Err(e) => PacfLag {
                lag: j,
                values: None,
                flag: Some(e.to_string()),
                cond_estimate: None,
            },
        })
        .collect();
    Ok(PacfSurface {
        grid,
        lags,
        basis: basis.label(),
        cap: options.cap,
    })
}

/// `sum_{j=b1}^{b} int phi_j^2` over the lag blocks of one fit.
pub fn trailing_energy(fit: &SieveFit, b1: usize) -> f64 {
    let basis = fit.basis();
    (b1..=fit.lags())
        .map(|j| {
            let block = fit.block(j);
            basis
                .weights()
                .iter()
                .enumerate()
                .map(|(q, w)| {
                    let v = dot(block, basis.node_values(q));
                    w * v * v
                })
                .sum::<f64>()
        })
        .sum()
}

fn check_band(b0: usize, b1: usize) -> Result<()> {
    if b1 == 0 || b1 > b0 {
        return Err(Error::invalid(format!(
            "need 1 <= b1 <= b0, got b0 = {b0}, b1 = {b1}"
        )));
    }
    Ok(())
}

/// `T_phi` from the order-`b0` fit.
pub fn pacf_zero_stat(ts: &TimeSeries, b0: usize, b1: usize, basis: &Basis) -> Result<f64> {
    check_band(b0, b1)?;
    Ok(trailing_energy(&fit(ts, b0, basis, 1)?, b1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacfZeroTestResult {
    /// Observed `n T_phi`.
    pub statistic: f64,
    pub replicates: Vec<f64>,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub critical_value: f64,
    pub b0: usize,
    pub b1: usize,
    pub c: usize,
    pub m: usize,
    pub basis: String,
    pub seed: u64,
    /// The limit theory assumes `b1` exceeds the true order; `b1 = 1` is exploratory.
    pub outside_stated_regime: bool,
}

/// Order-`b0` fit and bootstrap rows, reusable across `b1`.
#[derive(Debug, Clone)]
pub struct PacfZeroTester {
    fit: SieveFit,
    sigma_inv: DMatrix<f64>,
    boot: MultiplierBootstrap,
    n: usize,
    m: usize,
}

impl PacfZeroTester {
    pub fn new(ts: &TimeSeries, b0: usize, basis: &Basis, m: usize) -> Result<Self> {
        let f = fit(ts, b0, basis, 1)?;
        Self::from_fit(f, ts, m)
    }

    pub fn from_fit(fit: SieveFit, ts: &TimeSeries, m: usize) -> Result<Self> {
        let sigma_inv = sigma_inverse(&fit)?;
        let dim = sigma_inv.nrows();
        let boot = MultiplierBootstrap::new(&fit, ts.values(), m, DMatrix::zeros(dim, dim))?;
        Ok(Self {
            fit,
            sigma_inv,
            boot,
            n: ts.len(),
            m,
        })
    }

    pub fn fit(&self) -> &SieveFit {
        &self.fit
    }

    pub fn b0(&self) -> usize {
        self.fit.lags()
    }

    /// `n T_phi` for the band `b1..=b0`.
    pub fn statistic(&self, b1: usize) -> Result<f64> {
        check_band(self.b0(), b1)?;
        Ok(self.n as f64 * trailing_energy(&self.fit, b1))
    }

    pub fn gamma(&self, b1: usize) -> DMatrix<f64> {
        let proj = trailing_projection(self.b0(), b1, self.fit.basis_size());
        gamma_with_projection(&self.sigma_inv, &proj)
    }

    /// Multiplier draws of `Phi`; shared across bands to save work.
    pub fn phi_draws(&self, replicates: usize, seed: u64) -> Vec<DVector<f64>> {
        self.boot.phi_draws(replicates, seed, Domain::PacfBootstrap)
    }

    /// Test of band `b1..=b0` against precomputed draws.
    pub fn test_with_draws(
        &self,
        b1: usize,
        draws: &[DVector<f64>],
        alpha: f64,
        seed: u64,
    ) -> Result<PacfZeroTestResult> {
        let statistic = self.statistic(b1)?;
        let gamma = self.gamma(b1);
        let replicates: Vec<f64> = draws.par_iter().map(|phi| quad(&gamma, phi)).collect();
        if !statistic.is_finite() || replicates.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite PACF bootstrap statistic".into()));
        }
        let (p_value, reject, critical_value) = decide(statistic, &replicates, alpha);
        Ok(PacfZeroTestResult {
            statistic,
            replicates,
            p_value,
            alpha,
            reject,
            critical_value,
            b0: self.b0(),
            b1,
            c: self.fit.basis_size(),
            m: self.m,
            basis: self.fit.basis().label(),
            seed,
            outside_stated_regime: b1 == 1,
        })
    }

    pub fn test(&self, b1: usize, options: BootstrapOptions) -> Result<PacfZeroTestResult> {
        options.validate()?;
        check_band(self.b0(), b1)?;
        let draws = self.phi_draws(options.replicates, options.seed);
        self.test_with_draws(b1, &draws, options.alpha, options.seed)
    }
}

/// Multiplier-bootstrap test of `rho_{b1} = ... = rho_{b0} = 0`.
pub fn pacf_zero_test(
    ts: &TimeSeries,
    b0: usize,
    b1: usize,
    basis: &Basis,
    options: BootstrapOptions,
) -> Result<PacfZeroTestResult> {
    options.validate()?;
    check_band(b0, b1)?;
    PacfZeroTester::new(ts, b0, basis, options.m)?.test(b1, options)
}
