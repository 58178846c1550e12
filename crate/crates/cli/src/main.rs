mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dsc_core::classify::RewardKind;
use dsc_core::trainer::Credit;

#[derive(Debug, Parser)]
#[command(name = "dsc", version, about = "Search for closed-form fraud classifiers")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic transaction CSV with a planted fraud rule.
    Simulate(SimulateArgs),
    /// Engineer features from a raw transaction CSV.
    Ingest(IngestArgs),
    /// Train a policy and write run artifacts.
    Train(TrainArgs),
    /// Score an expression on a data split.
    Eval(EvalArgs),
    /// Pareto front and elbow of an archive.
    Pareto(ParetoArgs),
    /// Decision rules of a thresholded expression.
    Explain(ExplainArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 50_000)]
    rows: usize,
    #[arg(long, default_value_t = 0.01)]
    fraud_rate: f64,
    #[arg(long, default_value_t = 0.005)]
    label_noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Engineered table; a `.spec.json` feature sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Multiplier on the aggregate noise (0 disables it).
    #[arg(long)]
    noise_scale: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// `f1` or `ce`.
    #[arg(long)]
    reward: Option<RewardKind>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    /// `emitted` or `gp-refined`.
    #[arg(long, value_parser = parse_credit)]
    credit: Option<Credit>,
    #[arg(long)]
    train_subsample: Option<usize>,
}

fn parse_credit(s: &str) -> Result<Credit, String> {
    match s {
        "emitted" => Ok(Credit::Emitted),
        "gp-refined" => Ok(Credit::GpRefined),
        _ => Err(format!("unknown credit mode {s:?} (expected emitted or gp-refined)")),
    }
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Run directory; supplies the config and the default expression.
    #[arg(long)]
    run: Option<PathBuf>,
    /// Run configuration, if not taken from `--run`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Serialised prefix expression.
    #[arg(long, conflicts_with = "expression_file", allow_hyphen_values = true)]
    expression: Option<String>,
    #[arg(long)]
    expression_file: Option<PathBuf>,
    /// `train`, `validation` or `test`.
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long, conflicts_with = "sweep")]
    threshold: Option<f64>,
    /// Evaluate at t = 0.5, 0.6, 0.7, 0.8, 0.9.
    #[arg(long)]
    sweep: bool,
    /// Print JSON lines instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ParetoArgs {
    #[arg(long, required_unless_present = "run")]
    archive: Option<PathBuf>,
    #[arg(long)]
    run: Option<PathBuf>,
    /// Minimum F1 gain per unit of complexity for the elbow.
    #[arg(long, default_value_t = 0.005)]
    min_gain: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[arg(long, conflicts_with = "expression_file", allow_hyphen_values = true)]
    expression: Option<String>,
    #[arg(long)]
    expression_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Run directory whose (scaled) feature metadata to use.
    #[arg(long, conflicts_with = "spec")]
    run: Option<PathBuf>,
    /// Feature metadata JSON (as written by `ingest` or `train`).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Treat a score exactly at the threshold as legitimate.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Ingest(a) => commands::ingest(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Pareto(a) => commands::pareto(a),
        Command::Explain(a) => commands::explain(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code() as u8)
        }
    }
}
