//! Stationary autoregressive forecasters used as comparison baselines.
//!
//! `sblp` fits one AR model (order by AIC) to the whole sample; `pblp` fits an
//! AR(b) to a trailing window only.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::qr_least_squares;
use crate::series::TimeSeries;

pub const DEFAULT_MAX_ORDER: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArFit {
    pub order: usize,
    pub intercept: f64,
    pub coeffs: Vec<f64>,
    pub sigma2: f64,
    pub aic: f64,
}

impl ArFit {
    /// One-step forecast of the value following `values`.
    pub fn forecast(&self, values: &[f64]) -> f64 {
        let n = values.len();
        self.intercept
            + self
                .coeffs
                .iter()
                .enumerate()
                .map(|(j, a)| a * values[n - 1 - j])
                .sum::<f64>()
    }
}

/// OLS AR(`p`) with intercept, using responses `x_{start+1}..x_n` (`start >= p`).
fn fit_ar_from(values: &[f64], p: usize, start: usize) -> Result<ArFit> {
    let n = values.len();
    let rows = n.saturating_sub(start);
    if rows <= p + 1 {
        return Err(Error::Underdetermined { rows, cols: p + 1 });
    }
    let x = DMatrix::from_fn(rows, p + 1, |r, k| {
        if k == 0 {
            1.0
        } else {
            values[start + r - k]
        }
    });
    let y = DVector::from_fn(rows, |r, _| values[start + r]);
    let (beta, _) = qr_least_squares(&x, &y)?;
    let resid = &y - &x * &beta;
    let sigma2 = resid.norm_squared() / rows as f64;
    Ok(ArFit {
        order: p,
        intercept: beta[0],
        coeffs: beta.iter().skip(1).copied().collect(),
        sigma2,
        aic: rows as f64 * sigma2.max(f64::MIN_POSITIVE).ln() + 2.0 * (p + 1) as f64,
    })
}

/// OLS AR(`p`) with intercept on all available rows.
pub fn fit_stationary_ar(values: &[f64], p: usize) -> Result<ArFit> {
    fit_ar_from(values, p, p)
}

/// AR order by AIC over `0..=max_order` on the common sample `x_{max_order+1}..x_n`,
/// then refitted on all rows.
pub fn select_ar_aic(values: &[f64], max_order: usize) -> Result<ArFit> {
    let mut best: Option<ArFit> = None;
    for p in 0..=max_order {
        match fit_ar_from(values, p, max_order) {
            Ok(f) => {
                if best.as_ref().is_none_or(|b| f.aic < b.aic) {
                    best = Some(f);
                }
            }
            Err(Error::Underdetermined { .. }) => break,
            Err(Error::IllConditioned(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    let order = best
        .ok_or_else(|| Error::invalid("series too short for any AR order"))?
        .order;
    fit_stationary_ar(values, order)
}

/// Full-sample stationary AR forecast of `x_{n+1}`.
pub fn sblp_forecast(ts: &TimeSeries, max_order: usize) -> Result<(f64, ArFit)> {
    let f = select_ar_aic(ts.values(), max_order)?;
    Ok((f.forecast(ts.values()), f))
}

/// Stationary AR(`b`) fitted on the last `window` observations only.
pub fn pblp_forecast(ts: &TimeSeries, b: usize, window: usize) -> Result<(f64, ArFit)> {
    let values = ts.values();
    let w = window.min(values.len());
    let tail = &values[values.len() - w..];
    let f = fit_stationary_ar(tail, b)?;
    Ok((f.forecast(tail), f))
}

/// Default trailing window `max(n/4, 10 (b + 1))`, capped at `n`.
pub fn default_pblp_window(n: usize, b: usize) -> usize {
    (n / 4).max(10 * (b + 1)).min(n)
}
