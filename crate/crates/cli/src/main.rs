//! `dataqual`: train meta-models, score and filter corpora, measure semantic
//! diversity and check the parametric-loss argument behind the quality factor.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigFile, Global, UsageError};

#[derive(Parser, Debug)]
#[command(name = "dataqual", version, about = "Perplexity-ratio quality filtering for pretraining corpora")]
struct Cli {
    /// JSON config file; flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed; every stochastic step derives its own stream from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "SCALINGFILTER_WORKERS")]
    workers: Option<usize>,
    #[arg(long, global = true)]
    log_level: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the small and large n-gram meta-models on one corpus.
    TrainMeta(TrainMetaArgs),
    /// Score every document of a corpus with its quality factor.
    Score(ScoreArgs),
    /// Select documents from a score file and write the filtered corpus.
    Filter(FilterArgs),
    /// Measure subsampled semantic diversity of a corpus or corpus mixtures.
    Diversity(DiversityArgs),
    /// Check the loss-surface derivatives and quality-factor monotonicity.
    VerifyScaling(VerifyArgs),
    /// Merge the outputs of several runs into one comparison report.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct TrainMetaArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub small_order: Option<usize>,
    #[arg(long)]
    pub large_order: Option<usize>,
    #[arg(long)]
    pub smoothing_k: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Directory written by `train-meta`.
    #[arg(long)]
    pub models: Option<PathBuf>,
    #[arg(long)]
    pub remote_small: Option<String>,
    #[arg(long)]
    pub remote_large: Option<String>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub timeout_secs: Option<f64>,
    /// Score cache; reruns and resumed runs only evaluate missing documents.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Largest tolerated fraction of failed documents.
    #[arg(long)]
    pub error_budget: Option<f64>,
    #[arg(long)]
    pub chunk_size: Option<usize>,
}

#[derive(Args, Debug)]
pub struct FilterArgs {
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Source corpus; when given the kept documents are written to `<out>/corpus`.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// topk, temperature, gate or pareto.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub keep_rate: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub lo: Option<f64>,
    #[arg(long)]
    pub hi: Option<f64>,
    #[arg(long)]
    pub pareto_alpha: Option<f64>,
    /// `id<TAB>score` file with scores in [0, 1] for the pareto method.
    #[arg(long)]
    pub classifier_scores: Option<PathBuf>,
    #[arg(long)]
    pub shard_size: Option<usize>,
}

#[derive(Args, Debug)]
pub struct DiversityArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Documents per subsample.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Dimension of the built-in hashed embedding.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub embed_seed: Option<u64>,
    /// Remote embedding service base URL.
    #[arg(long)]
    pub embed_url: Option<String>,
    /// Fall back to the hashed embedding when the remote service fails.
    #[arg(long)]
    pub embed_fallback: bool,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub timeout_secs: Option<f64>,
    /// Corpora to mix; produces a diversity curve over the mixture size.
    #[arg(long, num_args = 2..)]
    pub mix: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub max_combinations: Option<usize>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub e: Option<f64>,
    #[arg(long = "a-coef")]
    pub a_coef: Option<f64>,
    #[arg(long = "b-coef")]
    pub b_coef: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub a_lo: Option<f64>,
    #[arg(long)]
    pub a_hi: Option<f64>,
    #[arg(long)]
    pub a_points: Option<usize>,
    #[arg(long)]
    pub n_lo: Option<f64>,
    #[arg(long)]
    pub n_hi: Option<f64>,
    #[arg(long)]
    pub n_points: Option<usize>,
    #[arg(long)]
    pub n_p: Option<f64>,
    #[arg(long)]
    pub n_q: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub secant_gap: Option<f64>,
    /// Model sizes for the parametric secant table.
    #[arg(long, num_args = 2..)]
    pub sizes: Option<Vec<f64>>,
    /// JSON list of measured `{label, n, mean_loss}` points for the secant table.
    #[arg(long)]
    pub measured: Option<PathBuf>,
    /// Also write the secant table as CSV.
    #[arg(long)]
    pub csv: bool,
    /// Add the compute-optimal allocation sweep.
    #[arg(long)]
    pub sweep_compute: bool,
    #[arg(long)]
    pub compute_lo: Option<f64>,
    #[arg(long)]
    pub compute_hi: Option<f64>,
    #[arg(long)]
    pub compute_steps: Option<usize>,
    #[arg(long)]
    pub flops_per_token_per_param: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Run output directories to compare.
    #[arg(long, num_args = 0..)]
    pub runs: Option<Vec<PathBuf>>,
}

/// Exit status and error code of a failed command.
fn classify(err: &anyhow::Error) -> (u8, Option<&'static str>) {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return (2, None);
        }
        if cause.downcast_ref::<commands::VerificationFailed>().is_some() {
            return (4, None);
        }
        let code = if let Some(e) = cause.downcast_ref::<dataqual::lm::LmError>() {
            e.code()
        } else if let Some(e) = cause.downcast_ref::<dataqual::scorer::ScoreError>() {
            e.code()
        } else if let Some(e) = cause.downcast_ref::<dataqual::selection::SelectionError>() {
            e.code()
        } else if let Some(e) = cause.downcast_ref::<dataqual::diversity::DiversityError>() {
            e.code()
        } else if let Some(e) = cause.downcast_ref::<dataqual::scaling::ScalingError>() {
            e.code()
        } else {
            continue;
        };
        let status = match code {
            "error-budget-exceeded" | "scorer-unavailable" | "embedder-unavailable" => 3,
            "condition-region-violated" => 4,
            c if c.starts_with("invalid-") => 2,
            "numeric-range" | "corpus-too-small" | "too-few-points" | "duplicate-size" | "empty-selection-input" => 2,
            _ => 1,
        };
        return (status, Some(code));
    }
    (1, None)
}

fn fail(err: anyhow::Error) -> ExitCode {
    let (status, code) = classify(&err);
    match code {
        Some(code) => eprintln!("error[{code}]: {err:#}"),
        None => eprintln!("error: {err:#}"),
    }
    ExitCode::from(status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match cli.config.as_deref().map(ConfigFile::load).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => return fail(e),
    };
    let defaults = Global::default();
    let global = Global {
        seed: cli.seed.or(file.seed).unwrap_or(defaults.seed),
        workers: cli.workers.or(file.workers).unwrap_or(defaults.workers),
        log_level: cli.log_level.or(file.log_level.clone()).unwrap_or(defaults.log_level),
        out: cli.out.or(file.out.clone()).unwrap_or(defaults.out),
    };
    env_logger::Builder::new()
        .parse_filters(&global.log_level)
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::TrainMeta(a) => commands::train_meta(&global, file.train_meta.unwrap_or_default(), a),
        Command::Score(a) => commands::score(&global, file.score.unwrap_or_default(), a),
        Command::Filter(a) => commands::filter(&global, file.filter.unwrap_or_default(), a),
        Command::Diversity(a) => commands::diversity(&global, file.diversity.unwrap_or_default(), a),
        Command::VerifyScaling(a) => commands::verify_scaling(&global, file.verify_scaling.unwrap_or_default(), a),
        Command::Report(a) => commands::report(&global, file.report.unwrap_or_default(), a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
