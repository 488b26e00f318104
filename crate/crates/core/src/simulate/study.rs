//! Monte-Carlo size, power and forecast-accuracy studies.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{default_pblp_window, pblp_forecast, sblp_forecast, DEFAULT_MAX_ORDER};
use crate::basis::{make_basis, BasisKind, BasisOptions};
use crate::error::{Error, Result};
use crate::fit::fit;
use crate::forecast::forecast_one;
use crate::rng::child_seed;
use crate::series::TimeSeries;
use crate::simulate::{simulate, Family, Innovation, ModelSpec};
use crate::stability::{decide, stability_test_from_fit, BootstrapOptions, Variant};
use crate::tuning::{auto_tune, tune_forecast, TuningConfig};

/// A cell is aborted once more than this share of its replications fail.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    /// Rejection rates under the constant-coefficient null.
    Size,
    /// Rejection rates under the sinusoidal alternative.
    Power,
    /// One-step forecast MSE of the sieve forecast and the stationary baselines.
    Forecast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub models: Vec<Family>,
    pub ns: Vec<usize>,
    pub bases: Vec<BasisKind>,
    pub alphas: Vec<f64>,
    /// Alternative amplitudes; empty means the family default.
    pub deltas: Vec<f64>,
    pub reps: usize,
    /// Bootstrap replicates `B` of each stability test.
    pub bootstrap_replicates: usize,
    pub seed: u64,
    /// Overrides the family's innovation law.
    pub innovation: Option<Innovation>,
    pub variant: Variant,
    pub tuning: TuningConfig,
    pub basis_options: BasisOptions,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            kind: StudyKind::Size,
            models: vec![Family::TvAr2],
            ns: vec![256],
            bases: vec![BasisKind::Fourier],
            alphas: vec![0.1],
            deltas: Vec::new(),
            reps: 100,
            bootstrap_replicates: 300,
            seed: 0,
            innovation: None,
            variant: Variant::LagsOnly,
            tuning: TuningConfig::default(),
            basis_options: BasisOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub model: String,
    pub n: usize,
    pub basis: String,
    pub alpha_or_delta: f64,
    pub metric: String,
    pub value: f64,
    pub mc_stderr: f64,
    /// Successful replications behind `value`.
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
}

impl StudyTable {
    pub const HEADER: &'static str = "model,n,basis,alpha_or_delta,metric,value,mc_stderr,reps";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.model, r.n, r.basis, r.alpha_or_delta, r.metric, r.value, r.mc_stderr, r.reps
            );
        }
        out
    }

    pub fn find(&self, metric: &str) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }
}

/// One simulated cell of a study.
#[derive(Debug, Clone, PartialEq)]
struct Cell {
    family: Family,
    n: usize,
    basis: BasisKind,
    /// `Some(delta)` for the alternative.
    delta: Option<f64>,
}

impl Cell {
    fn spec(&self, config: &StudyConfig, seed: u64) -> ModelSpec {
        let spec = match self.delta {
            Some(d) => ModelSpec::alternative(self.family, self.n, d, seed),
            None => ModelSpec::null(self.family, self.n, seed),
        };
        match config.innovation {
            Some(i) => spec.with_innovation(i),
            None => spec,
        }
    }
}

fn cells(config: &StudyConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &family in &config.models {
        for &n in &config.ns {
            for &basis in &config.bases {
                match config.kind {
                    StudyKind::Size => out.push(Cell { family, n, basis, delta: None }),
                    StudyKind::Power | StudyKind::Forecast => {
                        let deltas = if config.deltas.is_empty() {
                            vec![family.default_delta()]
                        } else {
                            config.deltas.clone()
                        };
                        for d in deltas {
                            out.push(Cell { family, n, basis, delta: Some(d) });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Decisions at each level of one tuned stability test on a simulated path.
pub fn stability_rep(
    ts: &TimeSeries,
    kind: BasisKind,
    config: &StudyConfig,
    seed: u64,
) -> Result<Vec<bool>> {
    let tuning = TuningConfig {
        seed: child_seed(seed, 1),
        ..config.tuning.clone()
    };
    let report = auto_tune(ts, kind, config.basis_options, &tuning)?;
    let basis = make_basis(kind, report.c_hat, config.basis_options)?;
    let f = fit(ts, report.b_hat, &basis, 1)?;
    let alpha = config.alphas.first().copied().unwrap_or(0.1);
    let result = stability_test_from_fit(
        &f,
        ts,
        BootstrapOptions {
            m: report.m_hat,
            replicates: config.bootstrap_replicates,
            alpha,
            seed: child_seed(seed, 2),
        },
        config.variant,
    )?;
    Ok(config
        .alphas
        .iter()
        .map(|a| decide(result.statistic, &result.replicates, *a).1)
        .collect())
}

/// Squared one-step errors `(sieve, sblp, pblp)` for forecasting `x_{n+1}` from `x_1..x_n`.
pub fn forecast_rep(
    path: &TimeSeries,
    kind: BasisKind,
    config: &StudyConfig,
    seed: u64,
) -> Result<[f64; 3]> {
    let n = path.len() - 1;
    let ts = path.head(n)?;
    let target = path.at(n + 1);
    let tuning = TuningConfig {
        seed: child_seed(seed, 1),
        ..config.tuning.clone()
    };
    let tuned = tune_forecast(&ts, kind, config.basis_options, &tuning, None)?;
    let basis = make_basis(kind, tuned.c, config.basis_options)?;
    let sieve = forecast_one(&fit(&ts, tuned.b, &basis, 1)?, &ts)?.point;
    let (sblp, _) = sblp_forecast(&ts, DEFAULT_MAX_ORDER)?;
    let (pblp, _) = pblp_forecast(&ts, tuned.b, default_pblp_window(n, tuned.b))?;
    Ok([
        (target - sieve).powi(2),
        (target - sblp).powi(2),
        (target - pblp).powi(2),
    ])
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

fn rate_and_stderr(hits: usize, total: usize) -> (f64, f64) {
    let p = hits as f64 / total as f64;
    (p, (p * (1.0 - p) / total as f64).sqrt())
}

fn validate(config: &StudyConfig) -> Result<()> {
    if config.kind != StudyKind::Forecast {
        if config.alphas.is_empty() {
            return Err(Error::invalid("study needs at least one alpha"));
        }
        if config.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::invalid("alphas must lie in (0, 1)"));
        }
        BootstrapOptions {
            m: 1,
            replicates: config.bootstrap_replicates,
            alpha: config.alphas[0],
            seed: 0,
        }
        .validate()?;
    }
    Ok(())
}

/// Runs every cell of the study; replication `r` of cell `k` uses seed
/// `child_seed(child_seed(seed, k), r)` regardless of scheduling.
pub fn run_size_power_study(config: &StudyConfig) -> Result<StudyTable> {
    validate(config)?;
    let mut table = StudyTable::default();
    if config.reps == 0 {
        return Ok(table);
    }
    for (k, cell) in cells(config).iter().enumerate() {
        let cell_seed = child_seed(config.seed, k as u64);
        let label = cell.basis.name().to_string();
        let model = cell.family.name().to_string();
        let outcomes: Vec<Result<Vec<f64>>> = (0..config.reps)
            .into_par_iter()
            .map(|r| {
                let seed = child_seed(cell_seed, r as u64);
                match config.kind {
                    StudyKind::Forecast => {
                        let path = simulate(&ModelSpec { n: cell.n + 1, ..cell.spec(config, seed) })?;
                        forecast_rep(&path, cell.basis, config, seed).map(|e| e.to_vec())
                    }
                    _ => {
                        let ts = simulate(&cell.spec(config, seed))?;
                        stability_rep(&ts, cell.basis, config, seed)
                            .map(|d| d.into_iter().map(|b| f64::from(u8::from(b))).collect())
                    }
                }
            })
            .collect();
        let ok: Vec<&Vec<f64>> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
        let failures = config.reps - ok.len();
        let failure_rate = failures as f64 / config.reps as f64;
        let aborted = failure_rate > MAX_FAILURE_RATE;
        let aod = cell.delta.unwrap_or(0.0);
        let mut push = |aod: f64, metric: String, value: f64, se: f64| {
            table.rows.push(StudyRow {
                model: model.clone(),
                n: cell.n,
                basis: label.clone(),
                alpha_or_delta: aod,
                metric,
                value: if aborted { f64::NAN } else { value },
                mc_stderr: if aborted { f64::NAN } else { se },
                reps: ok.len(),
            });
        };
        match config.kind {
            StudyKind::Forecast => {
                for (j, name) in ["mse_sieve", "mse_sblp", "mse_pblp"].iter().enumerate() {
                    let v: Vec<f64> = ok.iter().map(|o| o[j]).collect();
                    let (m, se) = if v.is_empty() { (f64::NAN, f64::NAN) } else { mean_and_stderr(&v) };
                    push(aod, name.to_string(), m, se);
                }
            }
            StudyKind::Size | StudyKind::Power => {
                for (j, alpha) in config.alphas.iter().enumerate() {
                    let hits = ok.iter().filter(|o| o[j] > 0.5).count();
                    let (p, se) = if ok.is_empty() { (f64::NAN, f64::NAN) } else { rate_and_stderr(hits, ok.len()) };
                    if config.kind == StudyKind::Size {
                        push(*alpha, "size".to_string(), p, se);
                    } else {
                        push(aod, format!("power@{alpha}"), p, se);
                    }
                }
            }
        }
        if failures > 0 {
            let (p, se) = rate_and_stderr(failures, config.reps);
            table.rows.push(StudyRow {
                model: model.clone(),
                n: cell.n,
                basis: label.clone(),
                alpha_or_delta: aod,
                metric: "failure_rate".to_string(),
                value: p,
                mc_stderr: se,
                reps: config.reps,
            });
        }
    }
    Ok(table)
}
