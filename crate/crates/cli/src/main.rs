//! `verolift`: sparse phase retrieval from quadratic measurements.
//!
//! `verolift solve` recovers a signal from a measurement file; `verolift
//! bench` runs seeded Monte Carlo studies and writes fixed-schema CSV (and
//! optional SVG) results.

use clap::{Parser, Subcommand, ValueEnum};
use std::process::ExitCode;

use verolift_core::experiment::{self, BenchError, ConfigError, ExperimentConfig};
use verolift_core::measure::{MeasurementSet, Variant};
use verolift_core::pipeline::{self, InvarianceMode, Method, PipelineError, SolveReport};
use verolift_core::solver::SolverError;

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "verolift", version, about = "Sparse phase retrieval by Veronese lifting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover a signal from a measurement file.
    Solve {
        /// JSON experiment/solver configuration.
        #[arg(long)]
        config: String,
        /// JSON measurement set.
        #[arg(long)]
        input: String,
        /// Output path for the JSON recovery report.
        #[arg(long)]
        out: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Monte Carlo benchmark; writes one CSV row per sweep point.
    Bench {
        #[arg(value_enum)]
        kind: BenchKind,
        /// JSON experiment configuration.
        #[arg(long)]
        config: String,
        /// CSV output path (defaults to the config's `csv` field).
        #[arg(long)]
        csv: Option<String>,
        /// Optional SVG plot path.
        #[arg(long)]
        svg: Option<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchKind {
    Exact,
    Noise,
    Fourier,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Convex,
    Greedy,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum InvarianceArg {
    None,
    Shift,
    Reflect,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Parser)]
struct Overrides {
    /// Recovery method override.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Invariance mode override.
    #[arg(long, value_enum)]
    invariance: Option<InvarianceArg>,
    /// Autocorrelation constraints override.
    #[arg(long, value_enum)]
    autocorr: Option<OnOff>,
}

impl Overrides {
    fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(m) = self.method {
            config.method = match m {
                MethodArg::Convex => Method::Convex,
                MethodArg::Greedy => Method::Greedy,
                MethodArg::Oracle => Method::Oracle,
            };
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(inv) = self.invariance {
            config.invariance = match inv {
                InvarianceArg::None => InvarianceMode::None,
                InvarianceArg::Shift => InvarianceMode::Shift,
                InvarianceArg::Reflect => InvarianceMode::Reflect,
            };
        }
        if let Some(ac) = self.autocorr {
            config.autocorr = matches!(ac, OnOff::On);
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(err.exit_code())
        }
    }
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Infeasible(String),
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Infeasible(m) | CliError::Other(m) => f.write_str(m),
        }
    }
}

fn load_config(path: &str, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {path}: {e}")))?;
    let mut config =
        ExperimentConfig::from_json(&text).map_err(|e| CliError::Config(e.to_string()))?;
    overrides.apply(&mut config);
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { config, input, out, overrides } => {
            let config = load_config(&config, &overrides)?;
            let text = std::fs::read_to_string(&input)
                .map_err(|e| CliError::Other(format!("cannot read input {input}: {e}")))?;
            let ms = MeasurementSet::from_json(&text)
                .map_err(|e| CliError::Config(format!("invalid measurement file: {e}")))?;
            let opts = config.recover_options();
            let recovery = pipeline::recover(&ms, &opts).map_err(classify_pipeline_error)?;
            let report = SolveReport::new(&ms, &opts, &recovery);
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Other(e.to_string()))?;
            std::fs::write(&out, json)
                .map_err(|e| CliError::Other(format!("cannot write {out}: {e}")))?;
            Ok(())
        }
        Command::Bench { kind, config, csv, svg, overrides } => {
            let mut config = load_config(&config, &overrides)?;
            validate_bench_kind(kind, &mut config)?;
            let csv_path = csv.or_else(|| config.csv.clone());
            let svg_path = svg.or_else(|| config.svg.clone());
            let table = experiment::run_monte_carlo(&config).map_err(classify_bench_error)?;
            let title = match kind {
                BenchKind::Exact => "exact recovery",
                BenchKind::Noise => "noisy recovery",
                BenchKind::Fourier => "support recovery from the power spectrum",
            };
            experiment::write_outputs(&table, csv_path.as_deref(), svg_path.as_deref(), title)
                .map_err(classify_bench_error)?;
            // Summary on stdout, one line per sweep point.
            print!("{}", experiment::to_csv(&table));
            Ok(())
        }
    }
}

fn validate_bench_kind(kind: BenchKind, config: &mut ExperimentConfig) -> Result<(), CliError> {
    match kind {
        BenchKind::Exact => {
            if config.epsilon != 0.0 {
                return Err(CliError::Config("bench exact requires epsilon = 0".into()));
            }
        }
        BenchKind::Noise => {
            if config.epsilon <= 0.0 {
                return Err(CliError::Config("bench noise requires epsilon > 0".into()));
            }
        }
        BenchKind::Fourier => {
            if config.variant != Variant::Fourier {
                return Err(CliError::Config("bench fourier requires variant = \"fourier\"".into()));
            }
        }
    }
    Ok(())
}

fn classify_pipeline_error(err: PipelineError) -> CliError {
    match err {
        PipelineError::Solver(SolverError::Infeasible { residual }) => {
            CliError::Infeasible(format!("equality system infeasible (residual {residual:.3e})"))
        }
        PipelineError::UnsupportedInvariance { .. }
        | PipelineError::NoisyShiftProgram
        | PipelineError::GreedyWithInvariance => CliError::Config(err.to_string()),
        other => CliError::Other(other.to_string()),
    }
}

fn classify_bench_error(err: BenchError) -> CliError {
    match err {
        BenchError::Config(ConfigError::Json(m)) | BenchError::Config(ConfigError::Invalid(m)) => {
            CliError::Config(m)
        }
        BenchError::Io { path, source } => CliError::Other(format!("cannot write {path}: {source}")),
        BenchError::Trial(m) => CliError::Other(m),
    }
}
