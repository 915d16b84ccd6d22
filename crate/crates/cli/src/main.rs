//! `vigil` — EEG vigilance-state scoring pipeline.
//!
//! Subcommands chain through CSV/model files:
//! `synth → features → train → predict → evaluate → explain`, plus `cv` for
//! cross-validated grid search. Every run writes a `<output>.manifest.json`
//! echoing the resolved configuration, and primary outputs are written to a
//! temp file and renamed so failures leave nothing partial behind.
//!
//! Exit codes: 0 success, 1 computation error, 2 usage or I/O error.

mod commands;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "vigil", version, about = "Rodent EEG vigilance-state scoring pipeline")]
struct Cli {
    /// Cap on worker threads for per-epoch stages (results are identical
    /// at any thread count).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic EEG dataset.
    Synth(SynthArgs),
    /// Extract feature vectors from a dataset CSV.
    Features(FeaturesArgs),
    /// Train a classifier on a feature CSV.
    Train(TrainArgs),
    /// Score a feature CSV with a trained model.
    Predict(PredictArgs),
    /// Compare predictions against labeled truth.
    Evaluate(EvaluateArgs),
    /// Feature importance and SHAP attributions for a boosted model.
    Explain(ExplainArgs),
    /// Cross-validated grid search.
    Cv(CvArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset CSV.
    #[arg(long)]
    out: PathBuf,
    /// Flat key-value config file (see docs for keys).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Epochs per vigilance state.
    #[arg(long)]
    per_class: Option<usize>,
    /// PRNG seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Additive noise sigma in µV.
    #[arg(long)]
    noise_sigma: Option<f64>,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Input dataset CSV.
    #[arg(long)]
    input: PathBuf,
    /// Output feature CSV.
    #[arg(long)]
    out: PathBuf,
    /// Feature schema: compact, extended, or raw_plus_compact.
    #[arg(long, default_value = "compact")]
    schema: String,
    /// MMD window length in samples.
    #[arg(long, default_value_t = 100)]
    mmd_window: usize,
    /// Welch segment length in samples.
    #[arg(long, default_value_t = 1000)]
    segment_len: usize,
    /// Welch overlap fraction [0, 1).
    #[arg(long, default_value_t = 0.5)]
    overlap: f64,
    /// Welch taper: hann or rectangular.
    #[arg(long, default_value = "hann")]
    window: String,
    /// Sampling rate in Hz.
    #[arg(long, default_value_t = 500.0)]
    fs: f64,
    /// Optional directory for per-epoch PSD dumps (freq_hz,density).
    #[arg(long)]
    psd_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Input feature CSV (must be fully labeled).
    #[arg(long)]
    features: PathBuf,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    /// Model family: gbt, logistic, or mlp.
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,

    // Boosting knobs (gbt).
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long)]
    colsample: Option<f64>,
    /// Minimum loss reduction to split (γ).
    #[arg(long)]
    gamma: Option<f64>,
    /// Leaf L2 regularization (λ).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    min_child_weight: Option<f64>,

    // Linear/network knobs.
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    /// Hidden layer sizes, comma separated (mlp).
    #[arg(long)]
    hidden: Option<String>,
    /// Fraction of rows held out for early stopping (mlp).
    #[arg(long, default_value_t = 0.15)]
    val_fraction: f64,
    /// Training-log CSV path (mlp; default: the model path + `.log.csv`).
    #[arg(long)]
    train_log: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Trained model file (any family).
    #[arg(long)]
    model: PathBuf,
    /// Input feature CSV.
    #[arg(long)]
    features: PathBuf,
    /// Output predictions CSV (label + per-class probabilities).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predictions CSV from `predict`.
    #[arg(long)]
    pred: PathBuf,
    /// Labeled feature CSV holding the truth.
    #[arg(long)]
    truth: PathBuf,
    /// Metrics CSV output.
    #[arg(long)]
    out_metrics: PathBuf,
    /// Reliability-bin CSV output.
    #[arg(long)]
    out_reliability: PathBuf,
    /// Number of equal-width confidence bins.
    #[arg(long, default_value_t = 10)]
    bins: usize,
}

#[derive(Args)]
struct ExplainArgs {
    /// Trained gbt model file.
    #[arg(long)]
    model: PathBuf,
    /// Feature CSV to attribute.
    #[arg(long)]
    features: PathBuf,
    /// Importance CSV output (feature,total_gain,share).
    #[arg(long)]
    out_importance: PathBuf,
    /// SHAP long-form CSV output (row,feature,feature_value,class,phi).
    #[arg(long)]
    out_shap: PathBuf,
    /// Mean-|phi| ranking CSV output (default: alongside --out-shap).
    #[arg(long)]
    out_ranking: Option<PathBuf>,
    /// Explain at most this many rows (0 = all).
    #[arg(long, default_value_t = 0)]
    max_rows: usize,
}

#[derive(Args)]
struct CvArgs {
    /// Labeled feature CSV.
    #[arg(long)]
    features: PathBuf,
    /// Model family: gbt, logistic, or mlp.
    #[arg(long)]
    model: String,
    /// Hyperparameter list, e.g. `--param eta=0.01,0.1` (repeatable).
    #[arg(long = "param")]
    params: Vec<String>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Ranked results CSV.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let threads = cli.threads.max(1);
    let result = match cli.command {
        Command::Synth(args) => commands::synth(args),
        Command::Features(args) => commands::features(args, threads),
        Command::Train(args) => commands::train(args),
        Command::Predict(args) => commands::predict(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Explain(args) => commands::explain(args),
        Command::Cv(args) => commands::cv(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(util::exit_code_for(&err))
        }
    }
}
