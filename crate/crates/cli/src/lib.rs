//! `gera` command-line front end.
//!
//! [`run_cli`] parses arguments, runs one subcommand inside a sized rayon
//! pool and maps failures to exit codes: 0 success, 1 usage, 2 data.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] gera_core::Error),
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: gera_core::Error },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "gera", version, about = "Align two precomputed embedding spaces")]
pub struct Cli {
    /// Worker threads; falls back to GERA_THREADS, then all cores
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a paired synthetic dataset (two EMB1 files and pairs.tsv)
    Synth(SynthArgs),
    /// L2-normalize the rows of an EMB1 file
    Normalize(NormalizeArgs),
    /// Build and cache the exact nearest-neighbor pool of an EMB1 file
    Knn(KnnArgs),
    /// Train both alignment heads
    Train(TrainArgs),
    /// Score a trained run on held-out pairs
    Eval(EvalArgs),
    /// Fit and score a baseline
    Baseline(BaselineArgs),
    /// Per-query retrieval latency of ASIF and a trained head across anchor counts
    Bench(BenchArgs),
    /// Train and score every kernel x strategy x K cell
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Latent dimension shared by both views
    #[arg(long, default_value_t = 4)]
    pub latent: usize,
    /// Number of points
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Dimension of view A
    #[arg(long, default_value_t = 32)]
    pub da: usize,
    /// Dimension of view B
    #[arg(long, default_value_t = 48)]
    pub db: usize,
    /// Standard deviation of additive noise
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (created if missing)
    #[arg(long)]
    pub out: PathBuf,
    /// Also write train_pairs.tsv with the first N pairs (0 = skip)
    #[arg(long, default_value_t = 0)]
    pub train_pairs: usize,
    /// Also write test_pairs.tsv with the last N pairs (0 = skip)
    #[arg(long, default_value_t = 0)]
    pub test_pairs: usize,
}

#[derive(Debug, Args)]
pub struct NormalizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct KnnArgs {
    /// EMB1 file
    #[arg(long)]
    pub emb: PathBuf,
    /// Candidates kept per point
    #[arg(long, default_value_t = 600)]
    pub pool_size: usize,
    /// KNN1 output file
    #[arg(long)]
    pub out: PathBuf,
}

/// Embedding inputs shared by training-style commands.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// EMB1 file of modality A
    #[arg(long)]
    pub a: PathBuf,
    /// EMB1 file of modality B
    #[arg(long)]
    pub b: PathBuf,
}

/// Training settings; each flag overrides the config-file key of the same
/// name (dashes become underscores).
#[derive(Debug, Args, Default, Clone)]
pub struct TrainFlags {
    /// key = value file; '#' starts a comment
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// [default: 2000]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// [default: 0.0002]
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// [default: 50]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// [default: 0.9]
    #[arg(long)]
    pub beta1: Option<f64>,
    /// [default: 0.999]
    #[arg(long)]
    pub beta2: Option<f64>,
    /// [default: 0.00000001]
    #[arg(long)]
    pub adam_eps: Option<f64>,
    /// Hidden widths, comma separated [default: 8000]
    #[arg(long)]
    pub hidden: Option<String>,
    /// [default: 768]
    #[arg(long)]
    pub out_dim: Option<usize>,
    /// [default: 0.3]
    #[arg(long)]
    pub dropout: Option<f64>,
    /// [default: 0.04]
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Weight of the geometric term; 0 trains contrastive-only [default: 0.5]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// heat | linear | squared | inverse [default: heat]
    #[arg(long)]
    pub kernel: Option<String>,
    /// Heat scale in the input spaces [default: 0.8]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Heat scale in the aligned space [default: 0.8]
    #[arg(long)]
    pub epsilon_aligned: Option<f64>,
    /// Neighbors per sampled neighborhood [default: 150]
    #[arg(long)]
    pub k: Option<usize>,
    /// Candidate pool per point [default: 4 * k]
    #[arg(long)]
    pub pool_size: Option<usize>,
    /// closest | uniform | biased [default: biased]
    #[arg(long)]
    pub strategy: Option<String>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Single-threaded, bitwise reproducible training [default: false]
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Training pairs (i<TAB>j per line)
    #[arg(long)]
    pub pairs: PathBuf,
    /// Cached KNN1 pool for A; built in memory when absent
    #[arg(long)]
    pub pool_a: Option<PathBuf>,
    /// Cached KNN1 pool for B; built in memory when absent
    #[arg(long)]
    pub pool_b: Option<PathBuf>,
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Run directory for model.ckpt, train_log.csv, epochs.csv, resolved.cfg
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Run directory written by `train`
    #[arg(long)]
    pub run: PathBuf,
    /// Held-out pairs
    #[arg(long)]
    pub pairs: PathBuf,
    /// Cutoffs for precision@k, comma separated
    #[arg(long, default_value = "1,5,10")]
    pub ks: String,
    /// Neighbors scored by the neighbor-rank metric (0 = skip)
    #[arg(long, default_value_t = 5)]
    pub rank_k: usize,
    /// Zero-shot samples (EMB1, modality A)
    #[arg(long)]
    pub zs_samples: Option<PathBuf>,
    /// Zero-shot labels, one class index per line
    #[arg(long)]
    pub zs_labels: Option<PathBuf>,
    /// Class prompt files (EMB1, modality B), comma separated, one per class
    #[arg(long)]
    pub zs_prompts: Option<String>,
    /// Also write the metric records here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineKind {
    Procrustes,
    Asif,
    Contrastive,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    pub method: BaselineKind,
    #[command(flatten)]
    pub data: DataArgs,
    /// Pairs used for fitting (anchors for asif)
    #[arg(long)]
    pub train_pairs: PathBuf,
    /// Held-out pairs
    #[arg(long)]
    pub test_pairs: PathBuf,
    /// Cutoffs for precision@k, comma separated
    #[arg(long, default_value = "1,5,10")]
    pub ks: String,
    /// Neighbors scored by the neighbor-rank metric (0 = skip)
    #[arg(long, default_value_t = 5)]
    pub rank_k: usize,
    /// asif: similarities kept per representation (clamped to the anchor count)
    #[arg(long, default_value_t = 800)]
    pub asif_k: usize,
    /// asif: sharpening exponent
    #[arg(long, default_value_t = 8.0)]
    pub asif_p: f64,
    /// procrustes: write the PRC1 model here; contrastive: run directory
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Also write the metric records here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Anchor counts, comma separated
    #[arg(long, default_value = "500,1000,2000,4000")]
    pub anchors: String,
    /// Gallery rows taken from the end of B
    #[arg(long, default_value_t = 500)]
    pub gallery: usize,
    /// Timed queries taken from the start of A
    #[arg(long, default_value_t = 50)]
    pub queries: usize,
    /// Timed passes per configuration
    #[arg(long, default_value_t = 7)]
    pub repetitions: usize,
    /// asif: similarities kept per representation (clamped to the anchor count)
    #[arg(long, default_value_t = 800)]
    pub asif_k: usize,
    /// asif: sharpening exponent
    #[arg(long, default_value_t = 8.0)]
    pub asif_p: f64,
    /// Trained run directory; a freshly initialized head is timed when absent
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Hidden widths of the untrained head, comma separated
    #[arg(long, default_value = "256")]
    pub hidden: String,
    /// Output width of the untrained head
    #[arg(long, default_value_t = 64)]
    pub out_dim: usize,
    /// Plot data (x, y, series)
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Also write the metric records here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub train_pairs: PathBuf,
    #[arg(long)]
    pub test_pairs: PathBuf,
    /// Neighborhood sizes, comma separated
    #[arg(long, default_value = "5,10,20")]
    pub ks: String,
    /// Kernel kinds, comma separated
    #[arg(long, default_value = "heat,linear,squared,inverse")]
    pub kernels: String,
    /// Sampling strategies, comma separated
    #[arg(long, default_value = "closest,uniform,biased")]
    pub strategies: String,
    #[command(flatten)]
    pub flags: TrainFlags,
    /// CSV with one row per cell
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn thread_count(flag: Option<usize>) -> CliResult<usize> {
    if let Some(n) = flag {
        return if n == 0 { Err(CliError::Usage("--threads must be positive".into())) } else { Ok(n) };
    }
    if let Ok(v) = std::env::var("GERA_THREADS") {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!("GERA_THREADS={v:?} is not a positive integer"))),
        };
    }
    Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn run(cli: Cli) -> CliResult<()> {
    let threads = thread_count(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} threads: {e}")))?;
    pool.install(|| match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Normalize(a) => commands::normalize(a),
        Command::Knn(a) => commands::knn(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Baseline(a) => commands::baseline(a),
        Command::Bench(a) => commands::bench(a),
        Command::Sweep(a) => commands::sweep(a),
    })
}

/// Help text of the top-level command or of one subcommand.
pub fn help_text(subcommand: Option<&str>) -> String {
    use clap::CommandFactory;
    let mut cmd = Cli::command();
    cmd.build();
    match subcommand {
        None => cmd.render_help().to_string(),
        Some(name) => cmd
            .find_subcommand_mut(name)
            .map(|c| c.render_help().to_string())
            .unwrap_or_default(),
    }
}
