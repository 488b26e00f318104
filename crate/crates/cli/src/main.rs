mod commands;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use locstat::stability::Variant;

use commands::{parse_variant, DataArgs, SimulateArgs, StudyArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad input, flags or configuration (exit 2).
    Config(String),
    /// A numerical pipeline failed (exit 3).
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<locstat::Error> for CliError {
    fn from(e: locstat::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "locstat", version, about = "Sieve forecasting and stability testing for locally stationary time series")]
struct Cli {
    /// Worker threads for bootstrap replicates and study cells.
    #[arg(long, global = true, env = "LOCSTAT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a time-varying AR model; writes the coefficient-function table.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// Forecast horizon of the regression.
        #[arg(long, default_value_t = 1)]
        h: usize,
        /// Grid points of the coefficient table.
        #[arg(long, default_value_t = 101)]
        grid: usize,
        /// Also write the fit record as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Forecast x_{n+h} with its estimated MSE (JSON).
    Forecast {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 1)]
        h: usize,
        /// Validation length for the (b, c) search.
        #[arg(long)]
        validation: Option<usize>,
    },
    /// Multiplier-bootstrap test of coefficient stability (JSON).
    StabilityTest {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "lags_only", value_parser = parse_variant)]
        variant: Variant,
        /// Include the sorted bootstrap replicates in the record.
        #[arg(long)]
        include_replicates: bool,
    },
    /// Time-varying PACF surface (CSV) with an optional zero test on lags b1..b0.
    Pacf {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[arg(long)]
        b1: Option<usize>,
        /// Zero-test JSON destination.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Simulate one of the benchmark models (CSV).
    Simulate(SimulateArgs),
    /// Monte-Carlo size, power or forecast study (CSV).
    Study(StudyArgs),
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Fit { data, h, grid, json } => commands::run_fit(data, *h, *grid, json.as_deref()),
        Command::Forecast { data, h, validation } => commands::run_forecast(data, *h, *validation),
        Command::StabilityTest {
            data,
            variant,
            include_replicates,
        } => commands::run_stability(data, *variant, *include_replicates),
        Command::Pacf { data, grid, b1, json } => commands::run_pacf(data, *grid, *b1, json.as_deref()),
        Command::Simulate(args) => commands::run_simulate(args),
        Command::Study(args) => commands::run_study(args),
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| CliError::Config(format!("cannot start {k} threads: {e}")))?;
            pool.install(|| dispatch(&cli.command))
        }
        None => dispatch(&cli.command),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
