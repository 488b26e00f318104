//! Point forecasts at the end of the sample and the estimated forecast MSE.

use serde::{Deserialize, Serialize};

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::fit::{fit, qr_least_squares, SieveFit};
use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub horizon: usize,
    pub point: f64,
    /// Estimated variance of the forecast error at `t = 1`, clipped at zero.
    pub mse_hat: f64,
    /// Whether the raw variance estimate was negative before clipping.
    pub mse_clipped: bool,
    /// `(phi_0(1), ..., phi_b(1))` of the horizon-specific fit.
    pub coeffs_at_1: Vec<f64>,
}

/// Forecast of `x_{n+h}` from a fit built on `ts` with start lag `h = fit.horizon()`.
///
/// Lag block `j` multiplies `x_{n+1-j}`, i.e. the last `b` observations.
pub fn forecast_from_fit(fit: &SieveFit, ts: &TimeSeries) -> Result<ForecastResult> {
    if fit.sample_len() != ts.len() {
        return Err(Error::invalid(format!(
            "fit was built on {} observations but the series has {}",
            fit.sample_len(),
            ts.len()
        )));
    }
    let coeffs = fit.coeffs_at(1.0);
    let n = ts.len();
    let mut point = coeffs[0];
    for (j, phi) in coeffs.iter().enumerate().skip(1) {
        point += phi * ts.at(n + 1 - j);
    }
    let (mse_hat, mse_clipped) = forecast_mse_parts(fit)?;
    Ok(ForecastResult {
        horizon: fit.horizon(),
        point,
        mse_hat,
        mse_clipped,
        coeffs_at_1: coeffs,
    })
}

/// One-step forecast `phi_0(1) + sum_j phi_j(1) x_{n+1-j}` from an `h = 1` fit.
pub fn forecast_one(fit: &SieveFit, ts: &TimeSeries) -> Result<ForecastResult> {
    if fit.horizon() != 1 {
        return Err(Error::invalid("forecast_one needs a fit with horizon 1"));
    }
    forecast_from_fit(fit, ts)
}

/// Direct `h`-step forecast: refits with lags `x_{i-h}, ..., x_{i-h-b+1}` and predicts `x_{n+h}`.
pub fn forecast_h(ts: &TimeSeries, b: usize, basis: &Basis, h: usize) -> Result<ForecastResult> {
    let f = fit(ts, b, basis, h)?;
    forecast_from_fit(&f, ts)
}

/// Sieve regression of squared residuals on `B(i/n)`, evaluated at `t = 1` and clipped at zero.
pub fn estimate_forecast_mse(fit: &SieveFit) -> Result<f64> {
    forecast_mse_parts(fit).map(|(v, _)| v)
}

fn forecast_mse_parts(fit: &SieveFit) -> Result<(f64, bool)> {
    let basis = fit.basis();
    let c = basis.size();
    let res = fit.residuals();
    if res.iter().all(|r| *r == 0.0) {
        return Ok((0.0, false));
    }
    let n = fit.time_scale() as f64;
    let first = fit.first_index();
    let mut x = nalgebra::DMatrix::<f64>::zeros(res.len(), c);
    let mut y = nalgebra::DVector::<f64>::zeros(res.len());
    let mut bt = vec![0.0; c];
    for (r, e) in res.iter().enumerate() {
        basis.eval_into((first + r) as f64 / n, &mut bt);
        for (k, v) in bt.iter().enumerate() {
            x[(r, k)] = *v;
        }
        y[r] = e * e;
    }
    let (coef, _) = qr_least_squares(&x, &y)?;
    basis.eval_into(1.0, &mut bt);
    let raw: f64 = coef.iter().zip(&bt).map(|(a, b)| a * b).sum();
    Ok(if raw < 0.0 { (0.0, true) } else { (raw, false) })
}
