//! `pdr`: synthesize IMU data, train the velocity model, reconstruct and score trajectories.
//!
//! Every subcommand reads defaults, then `--config FILE` (flat TOML, unknown
//! keys rejected), then flags, and writes the resolved configuration next to
//! its outputs. Exit status is 0 on success, 1 on a runtime failure and 2 on a
//! usage or configuration error.

mod commands;
mod config;
mod data;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use pdr_core::eval::Baseline;
use pdr_core::regression::KernelKind;
use pdr_core::synth::suite::SuiteKind;

use config::RunConfig;

/// Marks an error as caused by bad arguments or configuration.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl fmt::Display) -> anyhow::Error {
    UsageError(msg.to_string()).into()
}

#[derive(Parser)]
#[command(name = "pdr", version, about = "Learned inertial dead reckoning")]
struct Cli {
    /// Flat TOML config; flags override its keys
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Base seed for synthesis, pool selection and folds [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Bias regularization weight [default: 0.1]
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Rate sequences are resampled to, Hz [default: 200]
    #[arg(long, global = true, value_name = "HZ")]
    sample_rate: Option<f64>,
    /// Log more (-v info, -vv debug)
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic sequences and bias sidecars from a manifest or a named suite
    Synth(SynthArgs),
    /// Train the placement classifier and velocity regressors
    Train(TrainArgs),
    /// Reconstruct a trajectory from a sequence
    Run(RunArgs),
    /// Score trajectories against ground truth
    Eval(EvalArgs),
    /// Cross-validate every hyperparameter cell per placement and axis
    Gridsearch(TrainArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// TOML manifest: `seed`, a `[noise]` table and `[[script]]` entries
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
    /// Built-in suite instead of a manifest
    #[arg(long, value_parser = parse_suite)]
    suite: Option<SuiteKind>,
    /// Scripts per placement for --suite [default: 48 for train, else 2]
    #[arg(long)]
    per_placement: Option<usize>,
    /// Seconds per script for --suite [default: 20 for train, else 60]
    #[arg(long, value_name = "SECONDS")]
    duration: Option<f64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of labeled sequence CSVs
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Model file (train) or grid CSV (gridsearch)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Frames between training samples [default: 10]
    #[arg(long)]
    stride: Option<usize>,
    /// linear, poly2 or rbf [default: poly2]
    #[arg(long, value_parser = parse_kernel)]
    kernel: Option<KernelKind>,
    /// Kernel scale [default: 1 / feature dimension]
    #[arg(long)]
    gamma: Option<f64>,
    /// Classifier C [default: 10]
    #[arg(long)]
    classifier_c: Option<f64>,
    /// Training samples kept per placement [default: 600]
    #[arg(long)]
    pool: Option<usize>,
    /// Pick C and epsilon per regressor by cross-validated grid search
    #[arg(long)]
    grid_search: bool,
    /// Cross-validation folds [default: 3]
    #[arg(long)]
    folds: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Sequence CSV
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Trajectory CSV; online runs also write `<stem>.refined.csv`
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Stream frames through the online estimator
    #[arg(long)]
    online: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Trajectory CSV to score
    #[arg(long, value_name = "FILE")]
    trajectory: Option<PathBuf>,
    /// Trajectory CSV or sequence CSV with ground truth
    #[arg(long, value_name = "FILE")]
    ground_truth: Option<PathBuf>,
    /// Model for scoring the pipeline on --input
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Sequence CSV or directory of them
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Output directory for report.csv, report.txt and overlay SVGs
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Extra methods: `all` or a comma list of RAW, RIDI-MAG, RIDI-ORI
    #[arg(long, value_parser = parse_baselines)]
    baselines: Option<Baselines>,
    /// Comma list of λ values to sweep
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    lambda_sweep: Option<Vec<f64>>,
}

#[derive(Clone)]
struct Baselines(Vec<Baseline>);

fn parse_baselines(s: &str) -> Result<Baselines, String> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Baselines(Baseline::ALL.to_vec()));
    }
    s.split(',').map(str::parse).collect::<Result<_, _>>().map(Baselines)
}

fn parse_suite(s: &str) -> Result<SuiteKind, String> {
    s.parse()
}

fn parse_kernel(s: &str) -> Result<KernelKind, String> {
    [KernelKind::Linear, KernelKind::Poly2, KernelKind::Rbf]
        .into_iter()
        .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
        .ok_or_else(|| format!("unknown kernel {s:?} (expected linear, poly2 or rbf)"))
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn apply_train(cfg: &mut RunConfig, a: TrainArgs) {
    set_opt(&mut cfg.data, a.data);
    set_opt(&mut cfg.out, a.out);
    set(&mut cfg.stride, a.stride);
    set(&mut cfg.kernel, a.kernel);
    set_opt(&mut cfg.gamma, a.gamma);
    set(&mut cfg.classifier_c, a.classifier_c);
    set(&mut cfg.pool, a.pool);
    cfg.grid_search |= a.grid_search;
    set(&mut cfg.folds, a.folds);
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    set_opt(&mut cfg.seed, cli.seed);
    set(&mut cfg.lambda, cli.lambda);
    set(&mut cfg.sample_rate, cli.sample_rate);

    type Handler = fn(&mut RunConfig) -> anyhow::Result<()>;
    let handler: Handler = match cli.command {
        Command::Synth(a) => {
            set_opt(&mut cfg.manifest, a.manifest);
            set_opt(&mut cfg.suite, a.suite);
            set_opt(&mut cfg.per_placement, a.per_placement);
            set_opt(&mut cfg.duration, a.duration);
            set_opt(&mut cfg.out, a.out);
            commands::synth::run
        }
        Command::Train(a) => {
            apply_train(&mut cfg, a);
            commands::train::run
        }
        Command::Gridsearch(a) => {
            apply_train(&mut cfg, a);
            commands::train::gridsearch
        }
        Command::Run(a) => {
            set_opt(&mut cfg.model, a.model);
            set_opt(&mut cfg.input, a.input);
            set_opt(&mut cfg.out, a.out);
            cfg.online |= a.online;
            commands::run::run
        }
        Command::Eval(a) => {
            set_opt(&mut cfg.trajectory, a.trajectory);
            set_opt(&mut cfg.ground_truth, a.ground_truth);
            set_opt(&mut cfg.model, a.model);
            set_opt(&mut cfg.input, a.input);
            set_opt(&mut cfg.out, a.out);
            set(&mut cfg.baselines, a.baselines.map(|b| b.0));
            set(&mut cfg.lambda_sweep, a.lambda_sweep);
            commands::eval::run
        }
    };
    cfg.validate()?;
    handler(&mut cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<UsageError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
