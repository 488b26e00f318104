//! Data-driven choice of the lag order `b`, basis size `c` and block size `m`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{make_basis, Basis, BasisKind, BasisOptions};
use crate::error::{Error, Result};
use crate::fit::{fit, fit_scaled, SieveFit};
use crate::pacf::PacfZeroTester;
use crate::series::TimeSeries;
use crate::stability::{window_rows, BootstrapOptions};

pub const DEFAULT_B0: usize = 10;
pub const DEFAULT_H0: usize = 3;

/// Default `c` ladder of four values for a basis family.
pub fn default_c_candidates(kind: BasisKind) -> Vec<usize> {
    match kind {
        // odd sizes keep each sine paired with its cosine
        BasisKind::Fourier => vec![3, 5, 7, 9],
        BasisKind::Legendre => vec![2, 3, 4, 5],
        BasisKind::Daubechies => vec![2, 4, 8, 16],
    }
}

/// Default `m` ladder `1..=max(2 h0 + 1, ceil(1.5 n^{1/3}))`.
///
/// With no serial dependence the MV profile keeps falling with `m`, so the top
/// of the ladder bounds the selected block size; `n = 256` gives `m` in 4..=7.
pub fn default_m_candidates(n: usize, h0: usize) -> Vec<usize> {
    let top = ((1.5 * (n as f64).cbrt()).ceil() as usize).max(2 * h0 + 1);
    (1..=top).collect()
}

/// Pilot block size `round(n^{1/3})`, at least 1.
pub fn pilot_m(n: usize) -> usize {
    ((n as f64).cbrt().round() as usize).max(1)
}

/// Default validation length `floor(3 log2 n)`.
pub fn default_validation_len(n: usize) -> usize {
    (3.0 * (n as f64).log2()).floor() as usize
}

/// Default cross-validation length `floor(n / 10)`.
pub fn default_theta(n: usize) -> usize {
    n / 10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandTest {
    pub b1: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSelection {
    pub b: usize,
    pub b0: usize,
    /// Tests in scan order (`b1 = b0 - 1` downwards), stopping at the first rejection.
    pub tests: Vec<BandTest>,
    /// `true` when nothing was rejected and the fallback `b = 1` was used.
    pub fallback: bool,
}

/// Largest `b1 < b0` whose PACF band `b1..=b0` is rejected; 1 if none is.
///
/// The multiplier draws are shared across the bands.
pub fn select_b(
    ts: &TimeSeries,
    b0: usize,
    basis: &Basis,
    options: BootstrapOptions,
) -> Result<BSelection> {
    options.validate()?;
    if b0 < 2 {
        return Ok(BSelection {
            b: 1,
            b0,
            tests: Vec::new(),
            fallback: true,
        });
    }
    let tester = PacfZeroTester::new(ts, b0, basis, options.m)?;
    let draws = tester.phi_draws(options.replicates, options.seed);
    let mut tests = Vec::new();
    for b1 in (1..b0).rev() {
        let r = tester.test_with_draws(b1, &draws, options.alpha, options.seed)?;
        tests.push(BandTest {
            b1,
            statistic: r.statistic,
            p_value: r.p_value,
            reject: r.reject,
        });
        if r.reject {
            return Ok(BSelection {
                b: b1,
                b0,
                tests,
                fallback: false,
            });
        }
    }
    Ok(BSelection {
        b: 1,
        b0,
        tests,
        fallback: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub c: usize,
    pub cv: Option<f64>,
    /// Why the candidate was skipped.
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CSelection {
    pub c: usize,
    pub theta: usize,
    pub table: Vec<CvEntry>,
}

fn argmin_first<T>(items: impl Iterator<Item = (T, Option<f64>)>) -> Option<T> {
    let mut best: Option<(T, f64)> = None;
    for (key, score) in items {
        if let Some(s) = score.filter(|s| s.is_finite()) {
            if best.as_ref().is_none_or(|(_, b)| s < *b) {
                best = Some((key, s));
            }
        }
    }
    best.map(|(k, _)| k)
}

/// Cross-validated basis size.
///
/// Each candidate is fitted on `x_1..x_{n-theta}` (clock `i/n`) and scored by
/// `theta^{-1} sum_{k=1}^{theta} (x_{n-k} - xhat_{n-k})^2`. Ties go to the smaller `c`.
pub fn select_c_cv(
    ts: &TimeSeries,
    b: usize,
    kind: BasisKind,
    options: BasisOptions,
    theta: usize,
    candidates: &[usize],
) -> Result<CSelection> {
    let n = ts.len();
    if candidates.is_empty() {
        return Err(Error::invalid("no basis-size candidates"));
    }
    if theta == 0 || theta + b >= n {
        return Err(Error::invalid(format!(
            "theta must lie in 1..{}, got {theta}",
            n - b
        )));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let values = ts.values();
    let table: Vec<CvEntry> = sorted
        .par_iter()
        .map(|&c| {
            let scored = make_basis(kind, c, options)
                .and_then(|basis| fit_scaled(&values[..n - theta], b, &basis, 1, n))
                .map(|f| {
                    (1..=theta)
                        .map(|k| {
                            let i = n - k;
                            let e = values[i - 1] - f.predict_at(values, i);
                            e * e
                        })
                        .sum::<f64>()
                        / theta as f64
                });
            match scored {
                Ok(cv) => CvEntry { c, cv: Some(cv), flag: None },
                Err(e) => CvEntry { c, cv: None, flag: Some(e.to_string()) },
            }
        })
        .collect();
    let c = argmin_first(table.iter().map(|e| (e.c, e.cv)))
        .ok_or_else(|| Error::invalid("no feasible basis-size candidate"))?;
    Ok(CSelection { c, theta, table })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeEntry {
    pub m: usize,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MSelection {
    pub m: usize,
    pub h0: usize,
    /// `se(m_j)` for the interior of the ladder.
    pub table: Vec<SeEntry>,
}

/// Minimum-volatility block size over an ascending ladder.
pub fn select_m_mv(
    ts: &TimeSeries,
    fit: &SieveFit,
    candidates: &[usize],
    h0: usize,
) -> Result<MSelection> {
    if h0 == 0 {
        return Err(Error::invalid("h0 must be at least 1"));
    }
    let mut ladder = candidates.to_vec();
    ladder.sort_unstable();
    ladder.dedup();
    let limit = ts.len().saturating_sub(fit.lags());
    ladder.retain(|m| *m >= 1 && *m < limit);
    if ladder.len() < 2 * h0 + 1 {
        return Err(Error::invalid(format!(
            "the m ladder needs at least {} feasible values, got {}",
            2 * h0 + 1,
            ladder.len()
        )));
    }
    let n = fit.time_scale();
    let b = fit.lags();
    let omegas: Vec<nalgebra::DMatrix<f64>> = ladder
        .par_iter()
        .map(|&m| {
            let rows = window_rows(fit, ts.values(), m)?;
            let scale = 1.0 / ((n - m - b + 1) * m) as f64;
            Ok(rows.tr_mul(&rows) * scale)
        })
        .collect::<Result<_>>()?;
    let width = 2 * h0 + 1;
    let table: Vec<SeEntry> = (h0..ladder.len() - h0)
        .map(|j| {
            let window = &omegas[j - h0..=j + h0];
            let mean = window.iter().fold(
                nalgebra::DMatrix::<f64>::zeros(omegas[j].nrows(), omegas[j].ncols()),
                |acc, o| acc + o,
            ) / width as f64;
            let ss: f64 = window.iter().map(|o| (&mean - o).norm_squared()).sum();
            SeEntry {
                m: ladder[j],
                se: (ss / (2 * h0) as f64).sqrt(),
            }
        })
        .collect();
    let m = argmin_first(table.iter().map(|e| (e.m, Some(e.se))))
        .ok_or_else(|| Error::Numerical("minimum-volatility scores are not finite".into()))?;
    Ok(MSelection { m, h0, table })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationEntry {
    pub b: usize,
    pub c: usize,
    pub mse: Option<f64>,
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcSelection {
    pub b: usize,
    pub c: usize,
    pub l: usize,
    pub table: Vec<ValidationEntry>,
}

/// Neighbourhood grid `b +- 2` (at least 1) crossed with a `c` ladder.
pub fn default_bc_grid(b: usize, c_candidates: &[usize]) -> Vec<(usize, usize)> {
    let lo = b.saturating_sub(2).max(1);
    (lo..=b + 2)
        .flat_map(|bb| c_candidates.iter().map(move |&c| (bb, c)))
        .collect()
}

/// Validation-split choice of `(b, c)` for forecasting.
///
/// Each pair is fitted once on `x_1..x_{n-l}` and used to predict `x_{n-l+1}..x_n`
/// one step ahead. Ties go to the smaller `b`, then the smaller `c`.
pub fn select_bc_forecast(
    ts: &TimeSeries,
    kind: BasisKind,
    options: BasisOptions,
    grid: &[(usize, usize)],
    l: usize,
) -> Result<BcSelection> {
    let n = ts.len();
    if grid.is_empty() {
        return Err(Error::invalid("empty (b, c) grid"));
    }
    if l == 0 || l >= n {
        return Err(Error::invalid(format!("validation length must lie in 1..{n}, got {l}")));
    }
    let mut pairs = grid.to_vec();
    pairs.sort_unstable();
    pairs.dedup();
    let values = ts.values();
    let table: Vec<ValidationEntry> = pairs
        .par_iter()
        .map(|&(b, c)| {
            let scored = make_basis(kind, c, options)
                .and_then(|basis| fit_scaled(&values[..n - l], b, &basis, 1, n))
                .map(|f| {
                    (n - l + 1..=n)
                        .map(|i| {
                            let e = values[i - 1] - f.predict_at(values, i);
                            e * e
                        })
                        .sum::<f64>()
                        / l as f64
                });
            match scored {
                Ok(mse) => ValidationEntry { b, c, mse: Some(mse), flag: None },
                Err(e) => ValidationEntry { b, c, mse: None, flag: Some(e.to_string()) },
            }
        })
        .collect();
    let (b, c) = argmin_first(table.iter().map(|e| ((e.b, e.c), e.mse)))
        .ok_or_else(|| Error::invalid("no feasible (b, c) pair"))?;
    Ok(BcSelection { b, c, l, table })
}

/// Settings for the full tuning pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    pub b0: usize,
    /// Fixed values skip the corresponding selector.
    pub b: Option<usize>,
    pub c: Option<usize>,
    pub m: Option<usize>,
    pub c_candidates: Option<Vec<usize>>,
    pub m_candidates: Option<Vec<usize>>,
    pub h0: usize,
    pub theta: Option<usize>,
    /// Replicates and level of the PACF band tests in [`select_b`].
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            b0: DEFAULT_B0,
            b: None,
            c: None,
            m: None,
            c_candidates: None,
            m_candidates: None,
            h0: DEFAULT_H0,
            theta: None,
            replicates: 300,
            alpha: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub b_hat: usize,
    pub c_hat: usize,
    pub m_hat: usize,
    pub b_selection: Option<BSelection>,
    pub c_selection: Option<CSelection>,
    pub m_selection: Option<MSelection>,
    /// How each value was obtained: `"fixed"` or the selector used.
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub b: String,
    pub c: String,
    pub m: String,
}

/// Largest `b <= b0` whose order-`b` design with basis size `c` is feasible.
fn feasible_b0(n: usize, b0: usize, c: usize) -> usize {
    (1..=b0)
        .rev()
        .find(|b| n > *b && n - b > (b + 1) * c)
        .unwrap_or(1)
}

/// Runs the selectors in the order `b` (PACF band tests with a pilot `c` and `m`),
/// `c` (cross-validation), `m` (minimum volatility on the final fit).
pub fn auto_tune(
    ts: &TimeSeries,
    kind: BasisKind,
    options: BasisOptions,
    config: &TuningConfig,
) -> Result<TuningReport> {
    let n = ts.len();
    let c_ladder = config
        .c_candidates
        .clone()
        .unwrap_or_else(|| default_c_candidates(kind));
    if c_ladder.is_empty() {
        return Err(Error::invalid("no basis-size candidates"));
    }
    let pilot_c = config.c.unwrap_or(c_ladder[0]);
    let pilot_m = config.m.unwrap_or_else(|| pilot_m(n));

    let (b_hat, b_selection, b_prov) = match config.b {
        Some(b) => (b, None, "fixed".to_string()),
        None => {
            let basis = make_basis(kind, pilot_c, options)?;
            let b0 = feasible_b0(n, config.b0, pilot_c);
            let sel = select_b(
                ts,
                b0,
                &basis,
                BootstrapOptions {
                    m: pilot_m,
                    replicates: config.replicates,
                    alpha: config.alpha,
                    seed: config.seed,
                },
            )?;
            (sel.b, Some(sel), "pacf_band_tests".to_string())
        }
    };

    let (c_hat, c_selection, c_prov) = match config.c {
        Some(c) => (c, None, "fixed".to_string()),
        None => {
            let theta = config.theta.unwrap_or_else(|| default_theta(n));
            let sel = select_c_cv(ts, b_hat, kind, options, theta, &c_ladder)?;
            (sel.c, Some(sel), "cross_validation".to_string())
        }
    };

    let (m_hat, m_selection, m_prov) = match config.m {
        Some(m) => (m, None, "fixed".to_string()),
        None => {
            let basis = make_basis(kind, c_hat, options)?;
            let f = fit(ts, b_hat, &basis, 1)?;
            let ladder = config
                .m_candidates
                .clone()
                .unwrap_or_else(|| default_m_candidates(n, config.h0));
            let sel = select_m_mv(ts, &f, &ladder, config.h0)?;
            (sel.m, Some(sel), "minimum_volatility".to_string())
        }
    };

    Ok(TuningReport {
        b_hat,
        c_hat,
        m_hat,
        b_selection,
        c_selection,
        m_selection,
        provenance: Provenance {
            b: b_prov,
            c: c_prov,
            m: m_prov,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastTuning {
    pub b: usize,
    pub c: usize,
    /// Pilot `(b, c)` from the PACF band tests and cross-validation.
    pub pilot: TuningReport,
    pub validation: BcSelection,
}

/// Pilot `(b, c)` as in [`auto_tune`] (without `m`), refined on a validation split
/// over the neighbourhood grid.
pub fn tune_forecast(
    ts: &TimeSeries,
    kind: BasisKind,
    options: BasisOptions,
    config: &TuningConfig,
    l: Option<usize>,
) -> Result<ForecastTuning> {
    let pilot_cfg = TuningConfig {
        m: Some(config.m.unwrap_or_else(|| pilot_m(ts.len()))),
        ..config.clone()
    };
    let mut pilot = auto_tune(ts, kind, options, &pilot_cfg)?;
    if config.m.is_none() {
        pilot.provenance.m = "pilot".to_string();
    }
    let c_ladder = config
        .c_candidates
        .clone()
        .unwrap_or_else(|| default_c_candidates(kind));
    let b_grid = match config.b {
        Some(b) => vec![b],
        None => (pilot.b_hat.saturating_sub(2).max(1)..=pilot.b_hat + 2).collect(),
    };
    let c_grid = match config.c {
        Some(c) => vec![c],
        None => c_ladder,
    };
    let grid: Vec<(usize, usize)> = b_grid
        .iter()
        .flat_map(|&b| c_grid.iter().map(move |&c| (b, c)))
        .collect();
    let l = l.unwrap_or_else(|| default_validation_len(ts.len()));
    let validation = select_bc_forecast(ts, kind, options, &grid, l)?;
    Ok(ForecastTuning {
        b: validation.b,
        c: validation.c,
        pilot,
        validation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn ar(n: usize, coeffs: &[f64], seed: u64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let burn = 200;
        let mut x = vec![0.0; n + burn];
        for i in 0..n + burn {
            let mut v: f64 = StandardNormal.sample(&mut rng);
            for (j, a) in coeffs.iter().enumerate() {
                if i > j {
                    v += a * x[i - j - 1];
                }
            }
            x[i] = v;
        }
        TimeSeries::new(x[burn..].to_vec()).unwrap()
    }

    fn fourier(c: usize) -> Basis {
        make_basis(BasisKind::Fourier, c, BasisOptions::default()).unwrap()
    }

    #[test]
    fn single_candidate_is_returned() {
        let ts = ar(300, &[0.5], 1);
        let sel = select_c_cv(&ts, 1, BasisKind::Fourier, BasisOptions::default(), 30, &[3]).unwrap();
        assert_eq!(sel.c, 3);
        let bc = select_bc_forecast(&ts, BasisKind::Fourier, BasisOptions::default(), &[(2, 3)], 20)
            .unwrap();
        assert_eq!((bc.b, bc.c), (2, 3));
    }

    #[test]
    fn cv_matches_direct_computation() {
        let ts = ar(200, &[0.4], 2);
        let sel = select_c_cv(&ts, 1, BasisKind::Fourier, BasisOptions::default(), 20, &[1, 3]).unwrap();
        let v = ts.values();
        let f = fit_scaled(&v[..180], 1, &fourier(3), 1, 200).unwrap();
        let mut want = 0.0;
        for k in 1..=20 {
            let i = 200 - k;
            let t = i as f64 / 200.0;
            let pred = f.eval_coeff(0, t).unwrap() + f.eval_coeff(1, t).unwrap() * v[i - 2];
            want += (v[i - 1] - pred).powi(2);
        }
        let got = sel.table.iter().find(|e| e.c == 3).unwrap().cv.unwrap();
        assert!((got - want / 20.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_candidates_are_flagged() {
        let ts = ar(60, &[0.4], 3);
        let sel = select_c_cv(&ts, 2, BasisKind::Fourier, BasisOptions::default(), 6, &[1, 40]).unwrap();
        assert_eq!(sel.c, 1);
        assert!(sel.table.iter().any(|e| e.c == 40 && e.flag.is_some()));
    }

    #[test]
    fn mv_ladder_sizing() {
        let ts = ar(256, &[0.4, 0.4], 4);
        let f = fit(&ts, 2, &fourier(3), 1).unwrap();
        assert!(select_m_mv(&ts, &f, &[1, 2, 3, 4, 5, 6], 3).is_err());
        let sel = select_m_mv(&ts, &f, &default_m_candidates(256, 3), 3).unwrap();
        let ladder = default_m_candidates(256, 3);
        assert!(sel.m >= ladder[3] && sel.m <= ladder[ladder.len() - 4]);
        let best = sel.table.iter().map(|e| e.se).fold(f64::INFINITY, f64::min);
        assert_eq!(sel.table.iter().find(|e| e.m == sel.m).unwrap().se, best);
    }

    #[test]
    fn white_noise_selects_b_one() {
        let ts = ar(512, &[], 5);
        let sel = select_b(
            &ts,
            1,
            &fourier(3),
            BootstrapOptions { m: 8, replicates: 100, alpha: 0.1, seed: 1 },
        )
        .unwrap();
        assert_eq!(sel.b, 1);
        assert!(sel.fallback);
    }

    #[test]
    fn ar2_selects_at_least_two() {
        let ts = ar(2048, &[0.3, 0.3], 6);
        let sel = select_b(
            &ts,
            6,
            &fourier(3),
            BootstrapOptions { m: 12, replicates: 200, alpha: 0.05, seed: 2 },
        )
        .unwrap();
        assert!(sel.b >= 2);
        assert_eq!(sel.tests.last().unwrap().b1, sel.b);
    }

    #[test]
    fn bc_grid_ties_prefer_small_pairs() {
        let grid = default_bc_grid(1, &[3, 5]);
        assert_eq!(grid[0], (1, 3));
        assert_eq!(grid.len(), 6);
        assert!(argmin_first([((1, 3), Some(1.0)), ((1, 5), Some(1.0))].into_iter()) == Some((1, 3)));
    }

    #[test]
    fn auto_tune_reports_are_consistent() {
        let ts = ar(256, &[0.4, 0.4], 7);
        let r = auto_tune(&ts, BasisKind::Fourier, BasisOptions::default(), &TuningConfig::default()).unwrap();
        let cs = r.c_selection.as_ref().unwrap();
        assert!(cs.table.iter().any(|e| e.c == r.c_hat));
        assert!(r.m_hat >= 1);
        assert_eq!(r.b_selection.as_ref().unwrap().b, r.b_hat);
        let fixed = auto_tune(
            &ts,
            BasisKind::Fourier,
            BasisOptions::default(),
            &TuningConfig { b: Some(2), c: Some(5), m: Some(4), ..TuningConfig::default() },
        )
        .unwrap();
        assert_eq!((fixed.b_hat, fixed.c_hat, fixed.m_hat), (2, 5, 4));
        assert_eq!(fixed.provenance.b, "fixed");
    }
}
