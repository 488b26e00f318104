use std::path::{Path, PathBuf};

use locstat::basis::{make_basis, BasisKind, BasisOptions};
use locstat::forecast::{forecast_h, forecast_one};
use locstat::pacf::{pacf_surface, pacf_zero_test, SurfaceOptions};
use locstat::report::{self, coefficient_table_csv, fit_record, series_csv, stability_record};
use locstat::simulate::study::{run_size_power_study, StudyConfig, StudyKind};
use locstat::simulate::{simulate, Family, Innovation, ModelSpec};
use locstat::stability::{stability_test, BootstrapOptions, Variant};
use locstat::tuning::{
    auto_tune, default_c_candidates, default_m_candidates, default_theta, pilot_m, select_c_cv,
    select_m_mv, tune_forecast, TuningConfig, DEFAULT_H0,
};
use locstat::{fit, TimeSeries};
use serde::Serialize;
use serde_json::{json, Value};

use crate::input::parse_series;
use crate::CliError;

pub const DEFAULT_REPLICATES: usize = 1000;

/// Options shared by the data commands.
#[derive(Debug, Clone, clap::Args)]
pub struct DataArgs {
    /// Input CSV: one value column, optional header, optional leading time column.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Main output file (stdout when omitted).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value = "fourier", value_parser = parse_basis)]
    pub basis: BasisKind,
    /// Daubechies order N.
    #[arg(long, default_value_t = 9)]
    pub wavelet_order: usize,
    /// Lag order (auto-tuned when omitted).
    #[arg(long)]
    pub b: Option<usize>,
    /// Basis size (auto-tuned when omitted).
    #[arg(long)]
    pub c: Option<usize>,
    /// Bootstrap block size (auto-tuned when omitted).
    #[arg(long)]
    pub m: Option<usize>,
    /// Largest lag screened when selecting b.
    #[arg(long, default_value_t = 10)]
    pub b0: usize,
    /// Bootstrap replicates B.
    #[arg(long = "replicates", short = 'B', default_value_t = DEFAULT_REPLICATES)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl DataArgs {
    fn basis_options(&self) -> BasisOptions {
        BasisOptions {
            wavelet_order: self.wavelet_order,
            ..BasisOptions::default()
        }
    }

    fn tuning(&self) -> TuningConfig {
        TuningConfig {
            b0: self.b0,
            b: self.b,
            c: self.c,
            m: self.m,
            replicates: self.replicates,
            alpha: self.alpha,
            seed: locstat::rng::child_seed(self.seed, 1),
            ..TuningConfig::default()
        }
    }

    fn series(&self) -> Result<TimeSeries, CliError> {
        let file = std::fs::File::open(&self.input).map_err(|e| {
            CliError::Config(format!("cannot read {}: {e}", self.input.display()))
        })?;
        Ok(TimeSeries::new(parse_series(file)?)?)
    }
}

pub fn parse_basis(s: &str) -> Result<BasisKind, String> {
    s.parse().map_err(|e: locstat::Error| e.to_string())
}

pub fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: locstat::Error| e.to_string())
}

pub fn parse_innovation(s: &str) -> Result<Innovation, String> {
    s.parse().map_err(|e: locstat::Error| e.to_string())
}

pub fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: locstat::Error| e.to_string())
}

pub fn parse_kind(s: &str) -> Result<StudyKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "size" => Ok(StudyKind::Size),
        "power" => Ok(StudyKind::Power),
        "forecast" => Ok(StudyKind::Forecast),
        other => Err(format!("unknown study kind `{other}`")),
    }
}

/// Echo of the settings a command actually ran with.
#[derive(Debug, Clone, Serialize)]
struct ResolvedConfig {
    command: &'static str,
    input: String,
    output: Option<String>,
    basis: BasisKind,
    wavelet_order: usize,
    b: usize,
    c: usize,
    m: Option<usize>,
    h: Option<usize>,
    b0: Option<usize>,
    b1: Option<usize>,
    replicates: Option<usize>,
    alpha: Option<f64>,
    seed: u64,
}

impl ResolvedConfig {
    fn new(command: &'static str, args: &DataArgs, b: usize, c: usize) -> Self {
        Self {
            command,
            input: args.input.display().to_string(),
            output: args.output.as_ref().map(|p| p.display().to_string()),
            basis: args.basis,
            wavelet_order: args.wavelet_order,
            b,
            c,
            m: None,
            h: None,
            b0: None,
            b1: None,
            replicates: None,
            alpha: None,
            seed: args.seed,
        }
    }
}

fn with_config(mut record: Value, config: &ResolvedConfig, tuning: Value) -> Value {
    if let Value::Object(map) = &mut record {
        map.insert("config".into(), json!(config));
        map.insert("tuning".into(), tuning);
    }
    record
}

fn tuning_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).unwrap_or(Value::Null)
}

pub fn write_out(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Config(format!("cannot write to stdout: {e}")))
        }
    }
}

pub fn run_fit(args: &DataArgs, h: usize, grid: usize, json_path: Option<&Path>) -> Result<(), CliError> {
    let ts = args.series()?;
    let opts = args.basis_options();
    let n = ts.len();
    let tuning = TuningConfig {
        m: Some(args.m.unwrap_or_else(|| pilot_m(n))),
        ..args.tuning()
    };
    let report = if args.b.is_some() && args.c.is_some() {
        None
    } else {
        Some(auto_tune(&ts, args.basis, opts, &tuning)?)
    };
    let b = args.b.or(report.as_ref().map(|r| r.b_hat)).unwrap_or(1);
    let c = args.c.or(report.as_ref().map(|r| r.c_hat)).unwrap_or(1);
    let basis = make_basis(args.basis, c, opts)?;
    let f = fit(&ts, b, &basis, h)?;
    write_out(args.output.as_deref(), &coefficient_table_csv(&f, grid))?;
    if let Some(p) = json_path {
        let mut config = ResolvedConfig::new("fit", args, b, c);
        config.h = Some(h);
        let rec = with_config(fit_record(&f), &config, tuning_value(&report));
        write_out(Some(p), &report::to_json_string(&rec))?;
    }
    Ok(())
}

pub fn run_forecast(args: &DataArgs, h: usize, validation: Option<usize>) -> Result<(), CliError> {
    let ts = args.series()?;
    let opts = args.basis_options();
    let tuned = if args.b.is_some() && args.c.is_some() {
        None
    } else {
        Some(tune_forecast(&ts, args.basis, opts, &args.tuning(), validation)?)
    };
    let b = args.b.or(tuned.as_ref().map(|t| t.b)).unwrap_or(1);
    let c = args.c.or(tuned.as_ref().map(|t| t.c)).unwrap_or(1);
    let basis = make_basis(args.basis, c, opts)?;
    let result = if h == 1 {
        forecast_one(&fit(&ts, b, &basis, 1)?, &ts)?
    } else {
        forecast_h(&ts, b, &basis, h)?
    };
    let mut config = ResolvedConfig::new("forecast", args, b, c);
    config.h = Some(h);
    let rec = report::record("forecast", &result)?;
    let rec = with_config(rec, &config, tuning_value(&tuned));
    write_out(args.output.as_deref(), &report::to_json_string(&rec))
}

pub fn run_stability(args: &DataArgs, variant: Variant, include_replicates: bool) -> Result<(), CliError> {
    let ts = args.series()?;
    let opts = args.basis_options();
    let report = auto_tune(&ts, args.basis, opts, &args.tuning())?;
    let basis = make_basis(args.basis, report.c_hat, opts)?;
    let result = stability_test(
        &ts,
        report.b_hat,
        &basis,
        BootstrapOptions {
            m: report.m_hat,
            replicates: args.replicates,
            alpha: args.alpha,
            seed: locstat::rng::child_seed(args.seed, 2),
        },
        variant,
    )?;
    let mut config = ResolvedConfig::new("stability_test", args, report.b_hat, report.c_hat);
    config.m = Some(report.m_hat);
    config.replicates = Some(args.replicates);
    config.alpha = Some(args.alpha);
    let mut rec = stability_record(&result, include_replicates);
    if let Value::Object(map) = &mut rec {
        map.insert("seed".into(), json!(args.seed));
    }
    let rec = with_config(rec, &config, tuning_value(&report));
    write_out(args.output.as_deref(), &report::to_json_string(&rec))
}

pub fn run_pacf(
    args: &DataArgs,
    grid: usize,
    b1: Option<usize>,
    json_path: Option<&Path>,
) -> Result<(), CliError> {
    let ts = args.series()?;
    let opts = args.basis_options();
    let n = ts.len();
    let b0 = args.b0;
    // c by cross-validation on the order-b0 model when not given.
    let cv = match args.c {
        Some(_) => None,
        None => {
            let cands: Vec<usize> = default_c_candidates(args.basis)
                .into_iter()
                .filter(|c| n > b0 && n - b0 > (b0 + 1) * c)
                .collect();
            if cands.is_empty() {
                return Err(CliError::Config(format!(
                    "series of length {n} is too short for an order-{b0} PACF surface"
                )));
            }
            Some(select_c_cv(&ts, b0, args.basis, opts, default_theta(n), &cands)?)
        }
    };
    let c = args.c.or(cv.as_ref().map(|s| s.c)).unwrap_or(1);
    let basis = make_basis(args.basis, c, opts)?;
    let surface = pacf_surface(
        &ts,
        b0,
        &basis,
        SurfaceOptions {
            grid,
            ..SurfaceOptions::default()
        },
    )?;
    write_out(args.output.as_deref(), &surface.to_csv())?;
    let Some(b1) = b1 else {
        if json_path.is_some() {
            return Err(CliError::Config("--json needs --b1 for the zero test".into()));
        }
        return Ok(());
    };
    let mv = match args.m {
        Some(_) => None,
        None => {
            let f = fit(&ts, b0, &basis, 1)?;
            Some(select_m_mv(&ts, &f, &default_m_candidates(n, DEFAULT_H0), DEFAULT_H0)?)
        }
    };
    let m = args.m.or(mv.as_ref().map(|s| s.m)).unwrap_or(1);
    let result = pacf_zero_test(
        &ts,
        b0,
        b1,
        &basis,
        BootstrapOptions {
            m,
            replicates: args.replicates,
            alpha: args.alpha,
            seed: locstat::rng::child_seed(args.seed, 2),
        },
    )?;
    let mut config = ResolvedConfig::new("pacf", args, b0, c);
    config.m = Some(m);
    config.b0 = Some(b0);
    config.b1 = Some(b1);
    config.replicates = Some(args.replicates);
    config.alpha = Some(args.alpha);
    let mut rec = report::record("pacf_zero_test", &result)?;
    if let Value::Object(map) = &mut rec {
        map.remove("replicates");
        map.insert("B".into(), json!(args.replicates));
        map.insert("seed".into(), json!(args.seed));
    }
    let tuning = json!({ "c_selection": cv, "m_selection": mv });
    let rec = with_config(rec, &config, tuning);
    let text = report::to_json_string(&rec);
    match (json_path, &args.output) {
        (Some(p), _) => write_out(Some(p), &text),
        (None, Some(_)) => write_out(None, &text),
        (None, None) => Err(CliError::Config(
            "the zero-test JSON needs --json when the surface goes to stdout".into(),
        )),
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct SimulateArgs {
    /// Model: 1-7, 6#, 7# or a family name such as tvar2.
    #[arg(long, value_parser = parse_family)]
    pub model: Family,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Alternative amplitude; the constant-coefficient null when omitted.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_parser = parse_innovation)]
    pub innovation: Option<Innovation>,
    /// Drop the heteroscedastic error envelope.
    #[arg(long)]
    pub no_envelope: bool,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub fn run_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut spec = match args.delta {
        Some(d) => ModelSpec::alternative(args.model, args.n, d, args.seed),
        None => ModelSpec::null(args.model, args.n, args.seed),
    };
    if let Some(inn) = args.innovation {
        spec.innovation = inn;
    }
    if args.no_envelope {
        spec.envelope = false;
    }
    if let Some(b) = args.burn_in {
        spec.burn_in = b;
    }
    let ts = simulate(&spec)?;
    write_out(args.output.as_deref(), &series_csv(ts.values()))
}

#[derive(Debug, Clone, clap::Args)]
pub struct StudyArgs {
    /// TOML study description; flags given on the command line override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<StudyKind>,
    #[arg(long, value_delimiter = ',', value_parser = parse_family)]
    pub models: Option<Vec<Family>>,
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_basis)]
    pub bases: Option<Vec<BasisKind>>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Bootstrap replicates B per test.
    #[arg(long = "replicates", short = 'B')]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_innovation)]
    pub innovation: Option<Innovation>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub fn resolve_study(args: &StudyArgs) -> Result<StudyConfig, CliError> {
    let mut cfg: StudyConfig = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("invalid study config {}: {e}", p.display())))?
        }
        None => StudyConfig {
            bootstrap_replicates: DEFAULT_REPLICATES,
            ..StudyConfig::default()
        },
    };
    if let Some(k) = args.kind {
        cfg.kind = k;
    }
    if let Some(v) = &args.models {
        cfg.models = v.clone();
    }
    if let Some(v) = &args.ns {
        cfg.ns = v.clone();
    }
    if let Some(v) = &args.bases {
        cfg.bases = v.clone();
    }
    if let Some(v) = &args.alphas {
        cfg.alphas = v.clone();
    }
    if let Some(v) = &args.deltas {
        cfg.deltas = v.clone();
    }
    if let Some(v) = args.reps {
        cfg.reps = v;
    }
    if let Some(v) = args.replicates {
        cfg.bootstrap_replicates = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.innovation {
        cfg.innovation = Some(v);
    }
    Ok(cfg)
}

pub fn run_study(args: &StudyArgs) -> Result<(), CliError> {
    let cfg = resolve_study(args)?;
    let table = run_size_power_study(&cfg)?;
    write_out(args.output.as_deref(), &table.to_csv())
}
