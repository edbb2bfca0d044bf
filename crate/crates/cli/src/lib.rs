//! Command-line surface: generation, preprocessing, calibration, routing,
//! verification, and cost benchmarking as reproducible runs.
//!
//! Every command resolves its parameters as flags > config file > preset >
//! built-in default, validates them before doing any work, and writes
//! output files atomically. Diagnostics go to stderr under `SEQR_LOG`;
//! results go to stdout or `--out` only.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Process exit codes: usage 1, I/O 2, verification failure 3.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Verification(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Verification(m) => m,
        }
    }
}

fn core_err(e: seqr_core::Error) -> CliError {
    match &e {
        seqr_core::Error::Container(_) => CliError::Io(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    }
}

fn io_err(context: &str, e: std::io::Error) -> CliError {
    CliError::Io(format!("{context}: {e}"))
}

#[derive(Parser, Debug)]
#[command(
    name = "seqr",
    version,
    about = "Unsupervised LoRA-adapter routing by activation-norm maximization"
)]
pub struct Cli {
    /// Plain-text key=value config file; explicit flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic adapter library (and optionally labeled queries).
    Gen(GenArgs),
    /// Compute routed forms (arrow / spectr / seqr) for a stored library.
    Preprocess(PreprocessArgs),
    /// Estimate per-adapter norm statistics from labeled query samples.
    Calibrate(CalibrateArgs),
    /// Score queries against a library and log routing decisions.
    Route(RouteArgs),
    /// Evaluate analytic and measured routing costs.
    Bench(BenchArgs),
    /// Run the correctness property suites; nonzero exit on violation.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Default)]
pub struct GenArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Parameter bundle: `fig3` builds the 10-adapter mixed library.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub n_adapters: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    /// `on` for one shared A matrix, `off` for per-adapter A.
    #[arg(long)]
    pub shared_a: Option<String>,
    #[arg(long)]
    pub subspace_dim: Option<usize>,
    #[arg(long)]
    pub gain: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Comma-separated per-adapter scale factors on B, e.g. `10,1,1,1`.
    #[arg(long)]
    pub bias: Option<String>,
    /// Number of arrow-adversarial pairs to embed (shared A only).
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Labeled queries to emit per task adapter.
    #[arg(long)]
    pub per_task: Option<usize>,
    /// Separate seed for the query stream (defaults to a salt of --seed).
    #[arg(long)]
    pub query_seed: Option<u64>,
    /// Library container output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Query file output path.
    #[arg(long)]
    pub queries_out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub library: Option<PathBuf>,
    /// Comma-separated subset of `arrow,spectr,seqr`, or `all`.
    #[arg(long)]
    pub forms: Option<String>,
    /// Drop raw B matrices from the container (`on`/`off`).
    #[arg(long)]
    pub discard_b: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub library: Option<PathBuf>,
    /// Labeled query file whose task labels group calibration samples.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct RouteArgs {
    #[arg(long)]
    pub library: Option<PathBuf>,
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Apply stored z-score calibration (`on`/`off`).
    #[arg(long)]
    pub calibrated: Option<String>,
    /// Evaluate per-k accuracy over `a..b` instead of logging decisions.
    #[arg(long)]
    pub k_sweep: Option<String>,
    /// `fig3` implies a raw-score k sweep over the whole library.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct BenchArgs {
    /// `table1` prints the reference cost table; `fig5` runs all sweeps.
    #[arg(long)]
    pub preset: Option<String>,
    /// Sweep axis: hidden_dim | num_adapters | rank.
    #[arg(long)]
    pub axis: Option<String>,
    /// Comma-separated grid values for the sweep axis.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub n_adapters: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct VerifyArgs {
    /// Only check the literal two-adapter counterexample.
    #[arg(long)]
    pub counterexample: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random (library, input) pairs per equivalence suite.
    #[arg(long)]
    pub trials: Option<usize>,
}

/// Parses argv and runs the selected command. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version with success exits.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let file_cfg = match config::FileConfig::load(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => return fail(e),
    };
    let outcome = match cli.command {
        Command::Gen(args) => commands::cmd_gen(args, &file_cfg),
        Command::Preprocess(args) => commands::cmd_preprocess(args, &file_cfg),
        Command::Calibrate(args) => commands::cmd_calibrate(args, &file_cfg),
        Command::Route(args) => commands::cmd_route(args, &file_cfg),
        Command::Bench(args) => commands::cmd_bench(args, &file_cfg),
        Command::Verify(args) => commands::cmd_verify(args, &file_cfg),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> i32 {
    eprintln!("error: {}", e.message());
    e.exit_code()
}
