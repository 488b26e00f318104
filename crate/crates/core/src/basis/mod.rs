//! Orthonormal sieve bases on `[0, 1]`.
//!
//! Three families are available:
//!
//! * **Fourier**: `1, sqrt2 cos(2 pi t), sqrt2 sin(2 pi t), sqrt2 cos(4 pi t), ...`,
//!   truncated after `c` functions (an even `c` ends on a cosine).
//! * **Legendre**: `sqrt(2n + 1) P_n(2t - 1)` for `n = 0..c`, orthonormal on `[0, 1]`.
//! * **Daubechies**: the `c = 2^J` periodized scaling functions `phi_{J,k}`,
//!   `k = 0..2^J`, tabulated by the cascade algorithm and interpolated linearly.
//!
//! Every basis carries its own quadrature rule so that integrals of basis
//! products (`Gram`, means, coefficient norms) are computed consistently.

pub mod wavelet;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use wavelet::PeriodizedTable;

pub const DEFAULT_QUADRATURE_POINTS: usize = 4096;
pub const DEFAULT_WAVELET_ORDER: usize = 9;
/// Extra cascade levels beyond `J` used when no refinement level is given.
pub const DEFAULT_EXTRA_REFINEMENT: usize = 6;
/// Minimum extra cascade levels beyond `J`.
pub const MIN_EXTRA_REFINEMENT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Fourier,
    Legendre,
    Daubechies,
}

impl BasisKind {
    pub fn name(self) -> &'static str {
        match self {
            BasisKind::Fourier => "fourier",
            BasisKind::Legendre => "legendre",
            BasisKind::Daubechies => "daubechies",
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fourier" => Ok(BasisKind::Fourier),
            "legendre" => Ok(BasisKind::Legendre),
            "daubechies" | "db" | "wavelet" => Ok(BasisKind::Daubechies),
            other => Err(Error::invalid(format!("unknown basis kind `{other}`"))),
        }
    }
}

/// Construction knobs shared by all families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisOptions {
    /// Daubechies order `N` (filter length `2N`).
    pub wavelet_order: usize,
    /// Cascade refinement level `L`; the periodized table has `2^L` nodes. Defaults to `J + 6`.
    pub refinement: Option<usize>,
    /// Number of quadrature sub-intervals on `[0, 1]`.
    pub quadrature_points: usize,
}

impl Default for BasisOptions {
    fn default() -> Self {
        Self {
            wavelet_order: DEFAULT_WAVELET_ORDER,
            refinement: None,
            quadrature_points: DEFAULT_QUADRATURE_POINTS,
        }
    }
}

#[derive(Debug)]
struct Inner {
    kind: BasisKind,
    size: usize,
    options: BasisOptions,
    level: Option<usize>,
    table: Option<PeriodizedTable>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Basis values at the quadrature nodes, one row per node.
    node_values: Vec<f64>,
    mean: Vec<f64>,
}

/// An immutable sieve basis. Cloning is cheap (shared storage).
#[derive(Debug, Clone)]
pub struct Basis {
    inner: Arc<Inner>,
}

impl PartialEq for Basis {
    fn eq(&self, other: &Self) -> bool {
        self.kind() == other.kind()
            && self.size() == other.size()
            && self.inner.options == other.inner.options
    }
}

/// Builds a basis of `c` functions of the given family.
pub fn make_basis(kind: BasisKind, c: usize, options: BasisOptions) -> Result<Basis> {
    Basis::new(kind, c, options)
}

impl Basis {
    pub fn new(kind: BasisKind, c: usize, options: BasisOptions) -> Result<Self> {
        if c == 0 {
            return Err(Error::invalid("basis size c must be at least 1"));
        }
        if options.quadrature_points < 2 {
            return Err(Error::invalid("quadrature_points must be at least 2"));
        }
        let mut level = None;
        let mut table = None;
        let mut intervals = options.quadrature_points + options.quadrature_points % 2;
        if kind == BasisKind::Daubechies {
            if !c.is_power_of_two() {
                return Err(Error::invalid(format!(
                    "Daubechies basis size must be a power of two, got {c}"
                )));
            }
            let j = c.trailing_zeros() as usize;
            let order = options.wavelet_order;
            if order < wavelet::MIN_ORDER {
                return Err(Error::invalid(format!(
                    "Daubechies order must be at least {}, got {order}",
                    wavelet::MIN_ORDER
                )));
            }
            let refinement = options.refinement.unwrap_or(j + DEFAULT_EXTRA_REFINEMENT);
            if refinement < j + MIN_EXTRA_REFINEMENT {
                return Err(Error::invalid(format!(
                    "refinement level {refinement} must be at least J + {MIN_EXTRA_REFINEMENT} = {}",
                    j + MIN_EXTRA_REFINEMENT
                )));
            }
            if refinement > 24 {
                return Err(Error::invalid("refinement level above 24 is not supported"));
            }
            table = Some(PeriodizedTable::new(order, j, refinement)?);
            level = Some(j);
            // keep every Simpson panel inside one interpolation cell
            let min_intervals = 1usize << (refinement + 1);
            intervals = intervals.next_power_of_two().max(min_intervals);
        }

        let (nodes, weights) = simpson(intervals);
        let mut inner = Inner {
            kind,
            size: c,
            options,
            level,
            table,
            nodes,
            weights,
            node_values: Vec::new(),
            mean: vec![0.0; c],
        };
        let mut node_values = vec![0.0; inner.nodes.len() * c];
        for (row, t) in node_values.chunks_mut(c).zip(inner.nodes.iter()) {
            inner.eval_into(*t, row);
        }
        for (row, w) in node_values.chunks(c).zip(inner.weights.iter()) {
            for (m, v) in inner.mean.iter_mut().zip(row) {
                *m += w * v;
            }
        }
        inner.node_values = node_values;
        Ok(Self {
            inner: Arc::new(inner),
        })
    }

    pub fn kind(&self) -> BasisKind {
        self.inner.kind
    }

    /// Number of basis functions `c`.
    pub fn size(&self) -> usize {
        self.inner.size
    }

    pub fn options(&self) -> &BasisOptions {
        &self.inner.options
    }

    /// Dyadic level `J` for wavelet bases.
    pub fn level(&self) -> Option<usize> {
        self.inner.level
    }

    /// Effective cascade refinement level `L` for wavelet bases.
    pub fn refinement(&self) -> Option<usize> {
        self.inner.level.map(|j| {
            self.inner
                .options
                .refinement
                .unwrap_or(j + DEFAULT_EXTRA_REFINEMENT)
        })
    }

    /// `B(t) = (alpha_1(t), ..., alpha_c(t))`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        check_time(t)?;
        let mut out = vec![0.0; self.size()];
        self.inner.eval_into(t, &mut out);
        Ok(out)
    }

    /// Writes `B(t)` into `out` without range checks beyond clamping to `[0, 1]`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        self.inner.eval_into(t.clamp(0.0, 1.0), out);
    }

    /// Quadrature nodes on `[0, 1]`.
    pub fn nodes(&self) -> &[f64] {
        &self.inner.nodes
    }

    /// Quadrature weights matching [`Basis::nodes`]; they sum to one.
    pub fn weights(&self) -> &[f64] {
        &self.inner.weights
    }

    /// `B(t)` at quadrature node `q`.
    pub fn node_values(&self, q: usize) -> &[f64] {
        let c = self.size();
        &self.inner.node_values[q * c..(q + 1) * c]
    }

    /// Integral of a scalar function over `[0, 1]` using this basis' quadrature rule.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.inner
            .nodes
            .iter()
            .zip(&self.inner.weights)
            .map(|(t, w)| w * f(*t))
            .sum()
    }

    /// `B_bar = int_0^1 B(t) dt`.
    pub fn mean(&self) -> &[f64] {
        &self.inner.mean
    }

    /// Gram matrix `int_0^1 B(t) B(t)^T dt`.
    pub fn gram(&self) -> DMatrix<f64> {
        let c = self.size();
        let mut g = DMatrix::<f64>::zeros(c, c);
        for (q, w) in self.inner.weights.iter().enumerate() {
            let row = self.node_values(q);
            for a in 0..c {
                let wa = w * row[a];
                for b in a..c {
                    g[(a, b)] += wa * row[b];
                }
            }
        }
        for a in 0..c {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        g
    }

    /// `W = I - B_bar B_bar^T`.
    pub fn centering_matrix(&self) -> DMatrix<f64> {
        let c = self.size();
        let m = self.mean();
        DMatrix::from_fn(c, c, |a, b| {
            let id = if a == b { 1.0 } else { 0.0 };
            id - m[a] * m[b]
        })
    }

    /// Short label such as `fourier(c=5)` or `daubechies(N=9,c=8)`.
    pub fn label(&self) -> String {
        match self.kind() {
            BasisKind::Daubechies => format!(
                "daubechies(N={},c={})",
                self.inner.options.wavelet_order,
                self.size()
            ),
            k => format!("{}(c={})", k.name(), self.size()),
        }
    }
}

/// Free-function form of [`Basis::eval`].
pub fn eval_basis(basis: &Basis, t: f64) -> Result<Vec<f64>> {
    basis.eval(t)
}

/// Free-function form of [`Basis::mean`].
pub fn basis_mean(basis: &Basis) -> Vec<f64> {
    basis.mean().to_vec()
}

/// Free-function form of [`Basis::centering_matrix`].
pub fn centering_matrix(basis: &Basis) -> DMatrix<f64> {
    basis.centering_matrix()
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("time argument {t} outside [0, 1]")));
    }
    Ok(())
}

impl Inner {
    fn eval_into(&self, t: f64, out: &mut [f64]) {
        let c = self.size;
        match self.kind {
            BasisKind::Fourier => {
                let sqrt2 = std::f64::consts::SQRT_2;
                out[0] = 1.0;
                for (k, slot) in out.iter_mut().enumerate().take(c).skip(1) {
                    let freq = k.div_ceil(2) as f64;
                    let arg = 2.0 * std::f64::consts::PI * freq * t;
                    *slot = if k % 2 == 1 {
                        sqrt2 * arg.cos()
                    } else {
                        sqrt2 * arg.sin()
                    };
                }
            }
            BasisKind::Legendre => {
                let x = 2.0 * t - 1.0;
                let mut p_prev = 1.0;
                let mut p = x;
                out[0] = 1.0;
                if c > 1 {
                    out[1] = 3f64.sqrt() * p;
                }
                for n in 1..c.saturating_sub(1) {
                    let nf = n as f64;
                    let next = ((2.0 * nf + 1.0) * x * p - nf * p_prev) / (nf + 1.0);
                    p_prev = p;
                    p = next;
                    out[n + 1] = (2.0 * nf + 3.0).sqrt() * p;
                }
            }
            BasisKind::Daubechies => {
                self.table
                    .as_ref()
                    .expect("wavelet basis carries a table")
                    .eval_into(t, out);
            }
        }
    }
}

/// Composite Simpson rule on `[0, 1]` with an even number of sub-intervals.
fn simpson(intervals: usize) -> (Vec<f64>, Vec<f64>) {
    debug_assert!(intervals.is_multiple_of(2) && intervals >= 2);
    let h = 1.0 / intervals as f64;
    let nodes: Vec<f64> = (0..=intervals).map(|i| i as f64 * h).collect();
    let weights = (0..=intervals)
        .map(|i| {
            let w = if i == 0 || i == intervals {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect();
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn basis(kind: BasisKind, c: usize) -> Basis {
        make_basis(kind, c, BasisOptions::default()).unwrap()
    }

    fn max_identity_deviation(g: &DMatrix<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..g.nrows() {
            for b in 0..g.ncols() {
                let id = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g[(a, b)] - id).abs());
            }
        }
        worst
    }

    #[test]
    fn fourier_values_at_zero_and_quarter() {
        let b = basis(BasisKind::Fourier, 3);
        let v0 = b.eval(0.0).unwrap();
        assert_abs_diff_eq!(v0[0], 1.0);
        assert_abs_diff_eq!(v0[1], std::f64::consts::SQRT_2);
        assert_abs_diff_eq!(v0[2], 0.0);
        let vq = b.eval(0.25).unwrap();
        assert_abs_diff_eq!(vq[0], 1.0);
        assert_abs_diff_eq!(vq[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(vq[2], std::f64::consts::SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn even_fourier_size_ends_on_cosine() {
        let b = basis(BasisKind::Fourier, 4);
        let v = b.eval(0.0).unwrap();
        assert_abs_diff_eq!(v[3], std::f64::consts::SQRT_2);
    }

    #[test]
    fn legendre_constant_and_endpoint() {
        let b1 = basis(BasisKind::Legendre, 1);
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(b1.eval(t).unwrap(), vec![1.0]);
        }
        let b2 = basis(BasisKind::Legendre, 2);
        let v = b2.eval(1.0).unwrap();
        assert_abs_diff_eq!(v[0], 1.0);
        assert_abs_diff_eq!(v[1], 3f64.sqrt());
    }

    #[test]
    fn legendre_second_function_has_unit_norm_by_independent_rule() {
        // midpoint rule, independent of the Simpson nodes used internally
        let b = basis(BasisKind::Legendre, 2);
        let m = 20_000;
        let s: f64 = (0..m)
            .map(|i| {
                let t = (i as f64 + 0.5) / m as f64;
                b.eval(t).unwrap()[1].powi(2)
            })
            .sum::<f64>()
            / m as f64;
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn gram_is_identity_for_fourier_and_legendre() {
        for kind in [BasisKind::Fourier, BasisKind::Legendre] {
            for c in 1..=12 {
                let dev = max_identity_deviation(&basis(kind, c).gram());
                assert!(dev <= 1e-6, "{kind} c={c}: {dev}");
            }
        }
    }

    #[test]
    fn wavelet_gram_mean_and_partition() {
        for j in [3usize, 4] {
            let b = basis(BasisKind::Daubechies, 1 << j);
            let dev = max_identity_deviation(&b.gram());
            assert!(dev <= 1e-2, "J={j}: {dev}");
            let want = 2f64.powf(-(j as f64) / 2.0);
            for m in b.mean() {
                assert_abs_diff_eq!(*m, want, epsilon = 1e-2);
            }
        }
    }

    #[test]
    fn wavelet_partition_of_unity_on_grid() {
        let b = basis(BasisKind::Daubechies, 8);
        let l = b.refinement().unwrap();
        let scale = 2f64.powf(-1.5);
        for g in 0..=(1usize << l) {
            let t = g as f64 / (1usize << l) as f64;
            let s: f64 = b.eval(t).unwrap().iter().sum::<f64>() * scale;
            assert!((s - 1.0).abs() < 1e-2, "t={t}: {s}");
        }
    }

    #[test]
    fn means_of_polynomial_and_trig_bases() {
        for kind in [BasisKind::Fourier, BasisKind::Legendre] {
            let b = basis(kind, 7);
            assert_abs_diff_eq!(b.mean()[0], 1.0, epsilon = 1e-12);
            for m in &b.mean()[1..] {
                assert_abs_diff_eq!(*m, 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn centering_matrix_examples() {
        let w = basis(BasisKind::Fourier, 3).centering_matrix();
        let want = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0, 1.0]));
        assert!((w.clone() - want).abs().max() < 1e-10);
        let w4 = basis(BasisKind::Legendre, 4).centering_matrix();
        let want4 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0, 1.0, 1.0]));
        assert!((w4 - want4).abs().max() < 1e-10);
    }

    #[test]
    fn centering_matrix_is_idempotent_when_constant_in_span() {
        for (kind, c) in [
            (BasisKind::Fourier, 5),
            (BasisKind::Legendre, 6),
            (BasisKind::Daubechies, 8),
        ] {
            let b = basis(kind, c);
            let w = b.centering_matrix();
            let bar = nalgebra::DVector::from_column_slice(b.mean());
            let norm2 = bar.norm_squared();
            let wb = &w * &bar;
            assert!((wb - &bar * (1.0 - norm2)).abs().max() < 1e-12);
            assert!((&w * &w - &w).abs().max() < 1e-6, "{kind}");
            let eig = w.symmetric_eigen().eigenvalues;
            for e in eig.iter() {
                assert!(*e > -1e-9 && *e < 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn construction_errors() {
        let o = BasisOptions::default();
        assert!(make_basis(BasisKind::Fourier, 0, o).is_err());
        assert!(make_basis(BasisKind::Daubechies, 6, o).is_err());
        let low = BasisOptions {
            refinement: Some(5),
            ..o
        };
        assert!(make_basis(BasisKind::Daubechies, 4, low).is_err());
        let bad_order = BasisOptions {
            wavelet_order: 1,
            ..o
        };
        assert!(make_basis(BasisKind::Daubechies, 4, bad_order).is_err());
        assert!("spline".parse::<BasisKind>().is_err());
        assert_eq!("Fourier".parse::<BasisKind>().unwrap(), BasisKind::Fourier);
    }

    #[test]
    fn out_of_range_time_rejected() {
        let b = basis(BasisKind::Fourier, 3);
        assert!(b.eval(-0.01).is_err());
        assert!(b.eval(1.01).is_err());
        assert!(b.eval(f64::NAN).is_err());
    }
}
