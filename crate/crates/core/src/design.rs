//! Kronecker-structured regression design for sieve autoregressions.
//!
//! The row for (1-based) time `i` is `(1, x_{i-h}, ..., x_{i-h-b+1}) ⊗ B(i / n)`,
//! so columns `[j c, (j + 1) c)` hold lag `j` (block 0 is the intercept).

use nalgebra::{DMatrix, DVector};

use crate::basis::Basis;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct DesignMatrix {
    rows: DMatrix<f64>,
    response: DVector<f64>,
    lags: usize,
    horizon: usize,
    time_scale: usize,
    basis: Basis,
}

/// Design for an order-`b` sieve AR with `h`-step lags; rejects systems with `rows <= cols`.
pub fn build_design(values: &[f64], b: usize, basis: &Basis, h: usize) -> Result<DesignMatrix> {
    build_design_scaled(values, b, basis, h, values.len())
}

/// As [`build_design`], with the time argument computed as `i / time_scale`.
///
/// Used when fitting on a training prefix while keeping the full-sample clock.
pub fn build_design_scaled(
    values: &[f64],
    b: usize,
    basis: &Basis,
    h: usize,
    time_scale: usize,
) -> Result<DesignMatrix> {
    if b == 0 {
        return Err(Error::invalid("lag order b must be at least 1"));
    }
    let cols = (b + 1) * basis.size();
    let rows = (values.len() + 1).saturating_sub(b + h);
    if rows <= cols {
        return Err(Error::Underdetermined { rows, cols });
    }
    DesignMatrix::assemble(values, b, basis, h, time_scale)
}

impl DesignMatrix {
    /// Builds the design without the sizing check.
    pub fn assemble(
        values: &[f64],
        b: usize,
        basis: &Basis,
        h: usize,
        time_scale: usize,
    ) -> Result<Self> {
        if h == 0 {
            return Err(Error::invalid("horizon h must be at least 1"));
        }
        if time_scale < values.len() {
            return Err(Error::invalid("time scale must cover every observation"));
        }
        let first = b + h;
        if values.len() < first {
            return Err(Error::Underdetermined {
                rows: 0,
                cols: (b + 1) * basis.size(),
            });
        }
        let c = basis.size();
        let p = (b + 1) * c;
        let nrows = values.len() + 1 - first;
        let mut rows = DMatrix::<f64>::zeros(nrows, p);
        let mut response = DVector::<f64>::zeros(nrows);
        let mut bt = vec![0.0; c];
        let n = time_scale as f64;
        for r in 0..nrows {
            let i = first + r;
            basis.eval_into(i as f64 / n, &mut bt);
            response[r] = values[i - 1];
            for j in 0..=b {
                let x = if j == 0 { 1.0 } else { values[i - h - j] };
                for (k, v) in bt.iter().enumerate() {
                    rows[(r, j * c + k)] = x * v;
                }
            }
        }
        Ok(Self {
            rows,
            response,
            lags: b,
            horizon: h,
            time_scale,
            basis: basis.clone(),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn time_scale(&self) -> usize {
        self.time_scale
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// 1-based time index of the first row.
    pub fn first_index(&self) -> usize {
        self.lags + self.horizon
    }

    /// 1-based time index of row `r`.
    pub fn time_of_row(&self, r: usize) -> usize {
        self.first_index() + r
    }

    pub fn nrows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.rows.ncols()
    }
}
