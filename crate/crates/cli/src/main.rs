//! `klda`: penalized matrix-variate linear discriminant analysis.
//!
//! Subcommands: `simulate` (benchmark data generation), `fit` (penalized
//! fitting with optional penalty tuning), `predict` (classification),
//! `bench` (replication studies). Exit codes: 0 success, 1 usage error,
//! 2 data error, 3 numeric failure.

mod commands;
mod config;
mod errors;
mod formats;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use klda::fit::PenaltyConfig;

use commands::{BenchArgs, FitArgs, PredictArgs, SimulateArgs, Tuning};
use errors::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "klda", version, about = "Penalized matrix-variate LDA with Kronecker-structured precision")]
struct Cli {
    /// Worker threads for grid search and benchmark replicates (defaults to
    /// the rayon heuristic / RAYON_NUM_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// JSON config file with solver settings (flags take precedence).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one simulated replication (train/validate/test + truth).
    Simulate(SimulateCli),
    /// Fit the penalized model, optionally tuning the penalties first.
    Fit(FitCli),
    /// Classify a dataset with a fitted model.
    Predict(PredictCli),
    /// Replication study: penalized fit vs. unpenalized baseline.
    Bench(BenchCli),
}

#[derive(Args)]
struct SimulateCli {
    /// Covariance model, 1..=4.
    #[arg(long)]
    model: usize,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    c: usize,
    #[arg(long)]
    seed: u64,
    /// Output prefix; writes PREFIX.{train,validate,test}.kld and PREFIX.truth.json.
    #[arg(long)]
    out_prefix: PathBuf,
    /// Mean-pattern file (48 values: three 4x4 blocks row-major).
    #[arg(long)]
    pattern_file: Option<PathBuf>,
    #[arg(long, default_value_t = 75)]
    n_train: usize,
    #[arg(long, default_value_t = 75)]
    n_validate: usize,
    #[arg(long, default_value_t = 1000)]
    n_test: usize,
}

#[derive(Args)]
struct FitCli {
    #[arg(long)]
    train: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    lambda1: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda2: f64,
    /// Validation dataset for penalty selection (overrides fixed lambdas).
    #[arg(long, conflicts_with = "cv")]
    validate: Option<PathBuf>,
    /// k-fold cross-validation for penalty selection.
    #[arg(long)]
    cv: Option<usize>,
    /// Fold-assignment seed for --cv.
    #[arg(long, default_value_t = 0)]
    cv_seed: u64,
    /// Grid spec: `pow2:LO:STEP:HI` or comma-separated values.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictCli {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchCli {
    /// Covariance model, 1..=4.
    #[arg(long)]
    model: usize,
    /// Dimension list, e.g. `8x8,16x16,32x8`.
    #[arg(long)]
    dims: String,
    #[arg(long)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    /// Grid spec for penalty tuning (default: the full pow2:-12:0.5:12 set).
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Mean-pattern file (48 values: three 4x4 blocks row-major).
    #[arg(long)]
    pattern_file: Option<PathBuf>,
}

fn parse_dims(spec: &str) -> CliResult<Vec<(usize, usize)>> {
    spec.split(',')
        .map(|part| {
            let (a, b) = part
                .trim()
                .split_once('x')
                .ok_or_else(|| CliError::Usage(format!("bad dims entry {part:?}, expected RxC")))?;
            let r = a
                .parse()
                .map_err(|e| CliError::Usage(format!("bad dims entry {part:?}: {e}")))?;
            let c = b
                .parse()
                .map_err(|e| CliError::Usage(format!("bad dims entry {part:?}: {e}")))?;
            Ok((r, c))
        })
        .collect()
}

fn base_config(cli: &Cli) -> CliResult<(PenaltyConfig, Option<String>)> {
    let mut cfg = PenaltyConfig::new(0.0, 0.0);
    let mut grid = None;
    if let Some(path) = &cli.config {
        let file = config::FileConfig::load(path)?;
        file.apply(&mut cfg);
        grid = file.grid.clone();
        if cli.threads.is_none() {
            if let Some(t) = file.threads {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
        }
    }
    Ok((cfg, grid))
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let (cfg, config_grid) = base_config(&cli)?;
    match &cli.command {
        Command::Simulate(a) => commands::cmd_simulate(&SimulateArgs {
            model: a.model,
            r: a.r,
            c: a.c,
            seed: a.seed,
            out_prefix: a.out_prefix.clone(),
            pattern_file: a.pattern_file.clone(),
            n_train: a.n_train,
            n_validate: a.n_validate,
            n_test: a.n_test,
        }),
        Command::Fit(a) => {
            let tuning = if let Some(v) = &a.validate {
                Tuning::Validate(v.clone())
            } else if let Some(k) = a.cv {
                Tuning::CrossValidate { k, seed: a.cv_seed }
            } else {
                Tuning::Fixed
            };
            commands::cmd_fit(&FitArgs {
                train: a.train.clone(),
                lambda1: a.lambda1,
                lambda2: a.lambda2,
                tuning,
                grid: a.grid.clone().or(config_grid),
                out: a.out.clone(),
                config: cfg,
            })
        }
        Command::Predict(a) => commands::cmd_predict(&PredictArgs {
            model: a.model.clone(),
            data: a.data.clone(),
            out: a.out.clone(),
        }),
        Command::Bench(a) => commands::cmd_bench(&BenchArgs {
            model: a.model,
            dims: parse_dims(&a.dims)?,
            reps: a.reps,
            seed: a.seed,
            grid: a.grid.clone().or(config_grid),
            out: a.out.clone(),
            config: cfg,
            pattern_file: a.pattern_file.clone(),
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; true parse errors are
            // usage errors (exit 1).
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("klda: {e}");
            e.exit_code()
        }
    }
}
