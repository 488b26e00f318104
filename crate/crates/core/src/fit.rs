//! Sieve least squares for time-varying autoregressions.
//!
//! The coefficient functions are `phi_j(t) = sum_k a_{jk} alpha_k(t)`; all
//! `a_{jk}` are estimated jointly by one Householder-QR least-squares solve.

use nalgebra::{DMatrix, DVector};

use crate::basis::Basis;
use crate::design::{build_design_scaled, DesignMatrix};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Relative threshold on the smallest `|R_kk|` below which the design is rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// A fitted time-varying AR(b) sieve model.
#[derive(Debug, Clone)]
pub struct SieveFit {
    design: DesignMatrix,
    beta: DVector<f64>,
    residuals: Vec<f64>,
    sigma_hat: DMatrix<f64>,
    cond_estimate: f64,
}

/// Fits an order-`b` sieve AR with `h`-step lags on the whole series.
pub fn fit(ts: &TimeSeries, b: usize, basis: &Basis, h: usize) -> Result<SieveFit> {
    SieveFit::from_design(build_design_scaled(ts.values(), b, basis, h, ts.len())?)
}

/// Fits on `values` (a prefix of a longer series) with the clock `i / time_scale`.
pub fn fit_scaled(
    values: &[f64],
    b: usize,
    basis: &Basis,
    h: usize,
    time_scale: usize,
) -> Result<SieveFit> {
    SieveFit::from_design(build_design_scaled(values, b, basis, h, time_scale)?)
}

/// Least-squares solution of `y ≈ X beta` via Householder QR, with the rank check.
///
/// Returns the coefficients and the ratio `max |R_kk| / min |R_kk|`.
pub fn qr_least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let (rows, cols) = x.shape();
    if rows <= cols {
        return Err(Error::Underdetermined { rows, cols });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..cols).map(|k| r[(k, k)].abs()).collect();
    let largest = diag.iter().cloned().fold(0.0, f64::max);
    let smallest = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if largest.is_nan() || largest <= 0.0 || smallest < RANK_TOLERANCE * largest {
        let deficient = diag
            .iter()
            .filter(|d| **d < RANK_TOLERANCE * largest.max(f64::MIN_POSITIVE))
            .count();
        return Err(Error::IllConditioned(format!(
            "design is rank deficient: {deficient} of {cols} columns have |R_kk| below {RANK_TOLERANCE:e} x max"
        )));
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let head = qty.rows(0, cols).into_owned();
    let beta = r
        .solve_upper_triangular(&head)
        .ok_or_else(|| Error::IllConditioned("triangular solve failed".into()))?;
    Ok((beta, largest / smallest))
}

impl SieveFit {
    pub fn from_design(design: DesignMatrix) -> Result<Self> {
        let x = design.matrix();
        let y = design.response();
        let (beta, cond_estimate) = qr_least_squares(x, y)?;
        let fitted = x * &beta;
        let residuals: Vec<f64> = (y - fitted).iter().copied().collect();
        let sigma_hat = (x.transpose() * x) / design.time_scale() as f64;
        Ok(Self {
            design,
            beta,
            residuals,
            sigma_hat,
            cond_estimate,
        })
    }

    /// Builds a fit object around a given coefficient vector (residuals recomputed).
    pub fn with_coefficients(design: DesignMatrix, beta: DVector<f64>) -> Result<Self> {
        if beta.len() != design.ncols() {
            return Err(Error::invalid(format!(
                "coefficient vector has length {}, design has {} columns",
                beta.len(),
                design.ncols()
            )));
        }
        let x = design.matrix();
        let residuals = (design.response() - x * &beta).iter().copied().collect();
        let sigma_hat = (x.transpose() * x) / design.time_scale() as f64;
        Ok(Self {
            design,
            beta,
            residuals,
            sigma_hat,
            cond_estimate: f64::NAN,
        })
    }

    pub fn lags(&self) -> usize {
        self.design.lags()
    }

    pub fn basis_size(&self) -> usize {
        self.design.basis().size()
    }

    pub fn horizon(&self) -> usize {
        self.design.horizon()
    }

    pub fn basis(&self) -> &Basis {
        self.design.basis()
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    /// Series length the time argument is scaled by.
    pub fn time_scale(&self) -> usize {
        self.design.time_scale()
    }

    /// Number of observations the design was built from.
    pub fn sample_len(&self) -> usize {
        self.design.first_index() + self.design.nrows() - 1
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    /// `Sigma_hat = Y^T Y / n`.
    pub fn sigma_hat(&self) -> &DMatrix<f64> {
        &self.sigma_hat
    }

    /// Residuals `eps_i` for `i = first_index()..=n`, intercept included.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// 1-based time index of `residuals()[0]`.
    pub fn first_index(&self) -> usize {
        self.design.first_index()
    }

    pub fn cond_estimate(&self) -> f64 {
        self.cond_estimate
    }

    /// Coefficients `a_{j1}, ..., a_{jc}` of lag `j` (0 is the intercept).
    pub fn block(&self, j: usize) -> &[f64] {
        let c = self.basis_size();
        &self.beta.as_slice()[j * c..(j + 1) * c]
    }

    /// `phi_j(t)` with range checks.
    pub fn eval_coeff(&self, j: usize, t: f64) -> Result<f64> {
        if j > self.lags() {
            return Err(Error::invalid(format!(
                "lag {j} out of range 0..={}",
                self.lags()
            )));
        }
        let bt = self.basis().eval(t)?;
        Ok(dot(self.block(j), &bt))
    }

    /// All coefficient functions `(phi_0(t), ..., phi_b(t))`.
    pub fn coeffs_at(&self, t: f64) -> Vec<f64> {
        let mut bt = vec![0.0; self.basis_size()];
        self.basis().eval_into(t, &mut bt);
        (0..=self.lags()).map(|j| dot(self.block(j), &bt)).collect()
    }

    /// `int_0^1 phi_j(t) dt` by quadrature over the basis' nodes.
    pub fn coeff_mean(&self, j: usize) -> Result<f64> {
        if j > self.lags() {
            return Err(Error::invalid(format!(
                "lag {j} out of range 0..={}",
                self.lags()
            )));
        }
        let basis = self.basis();
        let block = self.block(j);
        Ok(basis
            .weights()
            .iter()
            .enumerate()
            .map(|(q, w)| w * dot(block, basis.node_values(q)))
            .sum())
    }

    /// Fitted one-step value at 1-based time `i` using lags from `values` (which may extend
    /// past the training sample).
    pub fn predict_at(&self, values: &[f64], i: usize) -> f64 {
        let h = self.horizon();
        let t = (i as f64 / self.time_scale() as f64).min(1.0);
        let coeffs = self.coeffs_at(t);
        let mut acc = coeffs[0];
        for (j, phi) in coeffs.iter().enumerate().skip(1) {
            acc += phi * values[i - h - j];
        }
        acc
    }
}

/// Free-function form of [`SieveFit::eval_coeff`].
pub fn eval_coeff(fit: &SieveFit, j: usize, t: f64) -> Result<f64> {
    fit.eval_coeff(j, t)
}

/// Free-function form of [`SieveFit::coeff_mean`].
pub fn coeff_mean(fit: &SieveFit, j: usize) -> Result<f64> {
    fit.coeff_mean(j)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
