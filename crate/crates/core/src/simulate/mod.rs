//! Simulation models for calibration and benchmarking.
//!
//! Models 1-5 are the non-stationary designs with the error envelope
//! `eps_i = (0.4 + 0.4 |sin(2 pi i / n)|) eta_i`; models 6, 7, 6# and 7# have
//! unit-variance Gaussian errors.

pub mod study;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Domain};
use crate::series::TimeSeries;

pub const DEFAULT_BURN_IN: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Model 1: `x_i = a_1 x_{i-1} + a_2 x_{i-2} + eps_i`.
    TvAr2,
    /// Model 2: `x_i = a_1 eps_{i-1} + a_2 eps_{i-2} + eps_i`.
    TvMa2,
    /// Model 3: `a_1` above zero, `a_2` below, on `x_{i-1}`.
    Setar,
    /// Model 4: Markov-switching AR(1), `a_1` in state 0 and `a_2` in state 1.
    MarkovSwitch,
    /// Model 5: `x_i = (a_1 eps_{i-1} + a_2) x_{i-1} + eps_i`.
    Bilinear,
    /// Model 6: `x_i - 0.5 x_{i-1} = eps_i + 0.5 eps_{i-1}`.
    Arma11,
    /// Model 7: stationary SETAR with slopes 0.4 / 0.5.
    StatSetar,
    /// Model 6#: `x_i = delta sin(4 pi i/n) x_{i-1} + eps_i`.
    NsLinear6,
    /// Model 7#: model 6# up to `0.75 n`, then SETAR with slopes 0.4 / 0.3.
    NsNonlin7,
}

impl Family {
    pub const ALL: [Family; 9] = [
        Family::TvAr2,
        Family::TvMa2,
        Family::Setar,
        Family::MarkovSwitch,
        Family::Bilinear,
        Family::Arma11,
        Family::StatSetar,
        Family::NsLinear6,
        Family::NsNonlin7,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::TvAr2 => "tvar2",
            Family::TvMa2 => "tvma2",
            Family::Setar => "setar",
            Family::MarkovSwitch => "markov",
            Family::Bilinear => "bilinear",
            Family::Arma11 => "arma11",
            Family::StatSetar => "stat_setar",
            Family::NsLinear6 => "ns_linear",
            Family::NsNonlin7 => "ns_nonlinear",
        }
    }

    /// Models 1-5 take `a_1, a_2` and the error envelope.
    pub fn is_enveloped(self) -> bool {
        matches!(
            self,
            Family::TvAr2 | Family::TvMa2 | Family::Setar | Family::MarkovSwitch | Family::Bilinear
        )
    }

    pub fn default_innovation(self) -> Innovation {
        match self {
            Family::TvAr2 | Family::TvMa2 => Innovation::StudentT5,
            _ => Innovation::Gaussian,
        }
    }

    /// `delta` of the sinusoidal alternative used for this model in the benchmarks.
    pub fn default_delta(self) -> f64 {
        match self {
            Family::TvAr2 | Family::TvMa2 => 0.35,
            _ => 0.5,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match key.as_str() {
            "1" | "tvar2" | "tvar" => Family::TvAr2,
            "2" | "tvma2" | "tvma" => Family::TvMa2,
            "3" | "setar" => Family::Setar,
            "4" | "markov" | "markov_switch" => Family::MarkovSwitch,
            "5" | "bilinear" => Family::Bilinear,
            "6" | "arma11" => Family::Arma11,
            "7" | "stat_setar" => Family::StatSetar,
            "6#" | "ns_linear" => Family::NsLinear6,
            "7#" | "ns_nonlinear" => Family::NsNonlin7,
            _ => return Err(Error::invalid(format!("unknown model `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Innovation {
    #[default]
    Gaussian,
    /// Student t with 5 degrees of freedom, unscaled (variance 5/3).
    StudentT5,
}

impl FromStr for Innovation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Innovation::Gaussian),
            "t5" | "student_t5" | "student-t5" | "t" => Ok(Innovation::StudentT5),
            _ => Err(Error::invalid(format!("unknown innovation law `{s}`"))),
        }
    }
}

/// A coefficient function on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CoeffFn {
    Constant { value: f64 },
    /// `base + delta sin(2 pi t)`.
    Sine { base: f64, delta: f64 },
    /// Piecewise-linear interpolation of values on a uniform grid over `[0, 1]`.
    Table { values: Vec<f64> },
}

impl CoeffFn {
    pub fn constant(value: f64) -> Self {
        CoeffFn::Constant { value }
    }

    pub fn sine(delta: f64) -> Self {
        CoeffFn::Sine { base: 0.2, delta }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            CoeffFn::Constant { value } => *value,
            CoeffFn::Sine { base, delta } => base + delta * (2.0 * PI * t).sin(),
            CoeffFn::Table { values } => match values.len() {
                0 => f64::NAN,
                1 => values[0],
                len => {
                    let x = t.clamp(0.0, 1.0) * (len - 1) as f64;
                    let k = (x.floor() as usize).min(len - 2);
                    let w = x - k as f64;
                    values[k] * (1.0 - w) + values[k + 1] * w
                }
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub a1: CoeffFn,
    pub a2: CoeffFn,
    /// Amplitude for models 6# and 7#.
    pub delta: f64,
    pub innovation: Innovation,
    pub envelope: bool,
    pub n: usize,
    pub seed: u64,
    pub burn_in: usize,
}

impl ModelSpec {
    /// Family defaults: the null `a_1 = a_2 = 0.4`, the family's innovation law and envelope.
    pub fn new(family: Family, n: usize, seed: u64) -> Self {
        Self {
            family,
            a1: CoeffFn::constant(0.4),
            a2: CoeffFn::constant(0.4),
            delta: family.default_delta(),
            innovation: family.default_innovation(),
            envelope: family.is_enveloped(),
            n,
            seed,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    /// Null setting `a_1 = a_2 = 0.4`.
    pub fn null(family: Family, n: usize, seed: u64) -> Self {
        Self::new(family, n, seed)
    }

    /// Alternative `a_1 = 0.4`, `a_2(t) = 0.2 + delta sin(2 pi t)`.
    pub fn alternative(family: Family, n: usize, delta: f64, seed: u64) -> Self {
        Self {
            a2: CoeffFn::sine(delta),
            delta,
            ..Self::new(family, n, seed)
        }
    }

    pub fn with_innovation(mut self, innovation: Innovation) -> Self {
        self.innovation = innovation;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

enum Draw {
    Gaussian,
    T(StudentT<f64>),
}

impl Draw {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Draw::Gaussian => StandardNormal.sample(rng),
            Draw::T(d) => d.sample(rng),
        }
    }
}

/// Simulates a path of length `spec.n` after `spec.burn_in` warm-up steps.
///
/// During the warm-up the time argument is frozen at `1/n`.
pub fn simulate(spec: &ModelSpec) -> Result<TimeSeries> {
    run(spec, None)
}

fn run(spec: &ModelSpec, mut states: Option<&mut Vec<u8>>) -> Result<TimeSeries> {
    let n = spec.n;
    if n < crate::series::MIN_LEN {
        return Err(Error::invalid(format!(
            "series length must be at least {}, got {n}",
            crate::series::MIN_LEN
        )));
    }
    let draw = match spec.innovation {
        Innovation::Gaussian => Draw::Gaussian,
        Innovation::StudentT5 => Draw::T(StudentT::new(5.0).expect("valid degrees of freedom")),
    };
    let mut rng = stream(spec.seed, Domain::Simulation, 0);
    let total = spec.burn_in + n;
    let nf = n as f64;
    let mut x = vec![0.0; total];
    let mut eps = vec![0.0; total];
    let mut state = 1u8;
    for s in 0..total {
        // model time index, 1-based on the kept part
        let i = s as i64 - spec.burn_in as i64 + 1;
        let t = (i.max(1) as f64) / nf;
        let scale = if spec.envelope {
            0.4 + 0.4 * (2.0 * PI * t).sin().abs()
        } else {
            1.0
        };
        let e = scale * draw.sample(&mut rng);
        eps[s] = e;
        let x1 = if s >= 1 { x[s - 1] } else { 0.0 };
        let x2 = if s >= 2 { x[s - 2] } else { 0.0 };
        let e1 = if s >= 1 { eps[s - 1] } else { 0.0 };
        let e2 = if s >= 2 { eps[s - 2] } else { 0.0 };
        let (a1, a2) = (spec.a1.eval(t), spec.a2.eval(t));
        let value = match spec.family {
            Family::TvAr2 => a1 * x1 + a2 * x2 + e,
            Family::TvMa2 => a1 * e1 + a2 * e2 + e,
            Family::Setar => {
                if x1 >= 0.0 {
                    a1 * x1 + e
                } else {
                    a2 * x1 + e
                }
            }
            Family::MarkovSwitch => {
                let u: f64 = rng.random();
                state = match state {
                    0 => u8::from(u >= 2.0 / 3.0),
                    _ => u8::from(u >= 0.5),
                };
                if let Some(out) = states.as_deref_mut() {
                    if i >= 1 {
                        out.push(state);
                    }
                }
                if state == 0 {
                    a1 * x1 + e
                } else {
                    a2 * x1 + e
                }
            }
            Family::Bilinear => (a1 * e1 + a2) * x1 + e,
            Family::Arma11 => 0.5 * x1 + e + 0.5 * e1,
            Family::StatSetar => {
                if x1 >= 0.0 {
                    0.4 * x1 + e
                } else {
                    0.5 * x1 + e
                }
            }
            Family::NsLinear6 => spec.delta * (4.0 * PI * t).sin() * x1 + e,
            Family::NsNonlin7 => {
                if (i as f64) <= 0.75 * nf {
                    spec.delta * (4.0 * PI * t).sin() * x1 + e
                } else if x1 >= 0.0 {
                    0.4 * x1 + e
                } else {
                    0.3 * x1 + e
                }
            }
        };
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "simulated path diverged at step {i}"
            )));
        }
        x[s] = value;
    }
    TimeSeries::new(x.split_off(spec.burn_in))
}

/// Markov-switching path together with its state sequence (kept part only).
pub fn simulate_markov_states(spec: &ModelSpec) -> Result<(TimeSeries, Vec<u8>)> {
    if spec.family != Family::MarkovSwitch {
        return Err(Error::invalid("state sequence is only defined for the Markov model"));
    }
    let mut states = Vec::with_capacity(spec.n);
    let ts = run(spec, Some(&mut states))?;
    Ok((ts, states))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lag1_autocorr(v: &[f64]) -> f64 {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
        let cov: f64 = v.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        cov / var
    }

    #[test]
    fn identical_specs_give_identical_paths() {
        for family in Family::ALL {
            let spec = ModelSpec::alternative(family, 128, 0.35, 9);
            let a = simulate(&spec).unwrap();
            let b = simulate(&spec).unwrap();
            assert_eq!(a, b, "{family}");
            assert_eq!(a.len(), 128);
            let c = simulate(&spec.clone().with_seed(10)).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn family_names_round_trip() {
        for family in Family::ALL {
            assert_eq!(family.name().parse::<Family>().unwrap(), family);
        }
        assert_eq!("6#".parse::<Family>().unwrap(), Family::NsLinear6);
        assert!("garch".parse::<Family>().is_err());
    }

    #[test]
    fn envelope_variance_at_quarter_point() {
        // with a = 0 the path is eps itself; at i = n/4 the envelope is 0.8
        let n = 256;
        let mut at_quarter = Vec::new();
        for seed in 0..400u64 {
            let spec = ModelSpec {
                a1: CoeffFn::constant(0.0),
                a2: CoeffFn::constant(0.0),
                innovation: Innovation::Gaussian,
                ..ModelSpec::new(Family::TvAr2, n, seed)
            };
            let x = simulate(&spec).unwrap();
            at_quarter.extend_from_slice(&x.values()[n / 4 - 3..n / 4 + 2]);
        }
        let var = at_quarter.iter().map(|v| v * v).sum::<f64>() / at_quarter.len() as f64;
        assert!((var / 0.64 - 1.0).abs() < 0.15, "{var}");
    }

    #[test]
    fn arma11_innovations_are_white() {
        let spec = ModelSpec::new(Family::Arma11, 4096, 3);
        let x = simulate(&spec).unwrap();
        let v = x.values();
        // invert x_i - 0.5 x_{i-1} = e_i + 0.5 e_{i-1} from a zero start
        let mut e = vec![0.0; v.len()];
        for i in 1..v.len() {
            e[i] = v[i] - 0.5 * v[i - 1] - 0.5 * e[i - 1];
        }
        assert!(lag1_autocorr(&e[50..]).abs() <= 0.05);
        assert!(lag1_autocorr(v) > 0.5);
    }

    #[test]
    fn markov_chain_stationary_share() {
        let spec = ModelSpec::new(Family::MarkovSwitch, 8192, 4);
        let (_, states) = simulate_markov_states(&spec).unwrap();
        let share = states.iter().filter(|s| **s == 0).count() as f64 / states.len() as f64;
        assert!((share - 0.6).abs() <= 0.05, "{share}");
    }

    #[test]
    fn markov_regimes_follow_states() {
        let spec = ModelSpec {
            a1: CoeffFn::constant(0.0),
            a2: CoeffFn::constant(1e3),
            envelope: false,
            ..ModelSpec::new(Family::MarkovSwitch, 64, 5)
        };
        let small = ModelSpec {
            a2: CoeffFn::constant(0.0),
            ..spec.clone()
        };
        let (x, states) = simulate_markov_states(&spec).unwrap();
        let y = simulate(&small).unwrap();
        for (i, state) in states.iter().enumerate().take(64).skip(1) {
            let d = x.values()[i] - y.values()[i];
            if *state == 0 {
                assert!(d.abs() < 1e-12);
            } else {
                assert!((d - 1e3 * x.values()[i - 1]).abs() < 1e-6 * (1.0 + d.abs()));
            }
        }
    }

    #[test]
    fn student_t_is_heavier_tailed() {
        let kurt = |innovation| {
            let spec = ModelSpec {
                a1: CoeffFn::constant(0.0),
                a2: CoeffFn::constant(0.0),
                envelope: false,
                innovation,
                ..ModelSpec::new(Family::TvAr2, 100_000, 6)
            };
            let x = simulate(&spec).unwrap();
            let v = x.values();
            let m2 = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
            let m4 = v.iter().map(|x| x.powi(4)).sum::<f64>() / v.len() as f64;
            m4 / (m2 * m2) - 3.0
        };
        assert!(kurt(Innovation::StudentT5) - kurt(Innovation::Gaussian) >= 1.0);
    }

    #[test]
    fn setar_regime_matches_sign() {
        let spec = ModelSpec {
            a1: CoeffFn::constant(0.9),
            a2: CoeffFn::constant(-0.2),
            ..ModelSpec::new(Family::Setar, 512, 7)
        };
        let zero = ModelSpec {
            a1: CoeffFn::constant(0.0),
            a2: CoeffFn::constant(0.0),
            ..spec.clone()
        };
        let x = simulate(&spec).unwrap();
        let e = simulate(&zero).unwrap();
        for i in 1..512 {
            let prev = x.values()[i - 1];
            let slope = if prev >= 0.0 { 0.9 } else { -0.2 };
            let want = slope * prev + e.values()[i];
            assert!((x.values()[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn coefficient_tables_interpolate() {
        let f = CoeffFn::Table { values: vec![0.0, 1.0, 0.0] };
        assert_eq!(f.eval(0.25), 0.5);
        assert_eq!(f.eval(1.0), 0.0);
        assert!((CoeffFn::sine(0.35).eval(0.25) - 0.55).abs() < 1e-12);
    }

    #[test]
    fn too_short_rejected() {
        assert!(simulate(&ModelSpec::new(Family::TvAr2, 4, 1)).is_err());
    }
}
