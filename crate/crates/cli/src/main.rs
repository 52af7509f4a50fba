//! `fim` — frequent-itemset mining from the command line.
//!
//! Four subcommands:
//!
//! * `mine` — run one mining algorithm over one transaction file.
//! * `bench` — run a benchmark grid and emit a CSV table (and optionally
//!   an SVG chart of mean times).
//! * `gen` — produce a synthetic market-basket dataset.
//! * `inspect` — print summary statistics for a transaction file.
//!
//! Exit codes: 0 on success, 1 for I/O and malformed-input failures, 2 for
//! invalid flags or configuration (clap usage errors also exit 2), and 3
//! when result verification against the oracle fails.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fim_core::bench::ChartDimension;
use fim_core::itemset::Algorithm;
use fim_core::mapreduce::BackendKind;
use fim_core::FimError;

#[derive(Parser)]
#[command(
    name = "fim",
    version,
    about = "Frequent-itemset mining over pluggable dataflow backends"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine frequent itemsets from a transaction file
    Mine(MineArgs),
    /// Run a benchmark grid and emit CSV (and optionally an SVG chart)
    Bench(BenchArgs),
    /// Generate a synthetic transaction database
    Gen(GenArgs),
    /// Print summary statistics for a transaction file
    Inspect(InspectArgs),
}

#[derive(Args)]
struct MineArgs {
    /// Transaction file: one transaction per line, whitespace-separated
    /// integer item tokens
    #[arg(long, value_name = "FILE")]
    input: PathBuf,

    /// Relative minimum support, in (0, 1]
    #[arg(long, value_name = "FRACTION")]
    minsup: f64,

    /// Mining algorithm
    #[arg(long, value_enum)]
    algo: AlgoArg,

    /// Execution backend (used by mr-apriori and pfp; the sequential
    /// algorithms ignore it)
    #[arg(long, value_enum, default_value_t = BackendArg::Sequential)]
    backend: BackendArg,

    /// Input partitions for the distributed algorithms (default: workers)
    #[arg(long, value_name = "N")]
    partitions: Option<usize>,

    /// Worker threads (default: FIM_WORKERS or the hardware thread count)
    #[arg(long, value_name = "N")]
    workers: Option<usize>,

    /// PFP item-group count (default: 2 x workers)
    #[arg(long, value_name = "N")]
    groups: Option<usize>,

    /// Write results here instead of stdout
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,

    /// Output format
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML grid config; exclusive with the inline grid flags
    #[arg(
        long,
        value_name = "FILE",
        conflicts_with_all = [
            "inputs", "synthetic", "minsups", "algos", "backends",
            "partitions", "workers", "groups", "trials", "seed",
            "no_verify", "warmup",
        ]
    )]
    config: Option<PathBuf>,

    /// Dataset file (repeatable); the file stem names the dataset
    #[arg(long = "input", value_name = "FILE")]
    inputs: Vec<PathBuf>,

    /// Synthetic dataset with this many transactions (repeatable)
    #[arg(long = "synthetic", value_name = "N")]
    synthetic: Vec<usize>,

    /// Relative minimum support, in (0, 1] (repeatable)
    #[arg(long = "minsup", value_name = "FRACTION")]
    minsups: Vec<f64>,

    /// Algorithm to run (repeatable; default: all four)
    #[arg(long = "algo", value_enum, value_name = "ALGO")]
    algos: Vec<AlgoArg>,

    /// Backend to run on (repeatable; default: all four)
    #[arg(long = "backend", value_enum, value_name = "BACKEND")]
    backends: Vec<BackendArg>,

    /// Input partitions (default: workers)
    #[arg(long, value_name = "N")]
    partitions: Option<usize>,

    /// Worker threads (default: FIM_WORKERS or the hardware thread count)
    #[arg(long, value_name = "N")]
    workers: Option<usize>,

    /// PFP item-group count (default: 2 x workers)
    #[arg(long, value_name = "N")]
    groups: Option<usize>,

    /// Timed trials per grid cell
    #[arg(long, value_name = "N")]
    trials: Option<usize>,

    /// RNG seed for --synthetic datasets
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Skip oracle verification
    #[arg(long)]
    no_verify: bool,

    /// Run one untimed warmup call per cell before the timed trials
    #[arg(long)]
    warmup: bool,

    /// Write the CSV table here instead of stdout
    #[arg(long, value_name = "FILE")]
    csv_out: Option<PathBuf>,

    /// Also render a grouped bar chart of mean times
    #[arg(long, value_name = "FILE")]
    svg_out: Option<PathBuf>,

    /// Chart grouping dimension
    #[arg(long, value_enum, default_value_t = ChartByArg::Backend)]
    chart_by: ChartByArg,
}

#[derive(Args)]
struct GenArgs {
    /// Number of transactions
    #[arg(long, value_name = "N")]
    transactions: Option<usize>,

    /// Item universe size
    #[arg(long, value_name = "N")]
    items: Option<usize>,

    /// Mean transaction length
    #[arg(long, value_name = "N")]
    avg_len: Option<usize>,

    /// Mean latent-pattern length
    #[arg(long, value_name = "N")]
    avg_pattern_len: Option<usize>,

    /// Number of latent patterns
    #[arg(long, value_name = "N")]
    patterns: Option<usize>,

    /// RNG seed
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Write here instead of stdout
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    /// Transaction file to summarize
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum AlgoArg {
    Apriori,
    Fpgrowth,
    MrApriori,
    Pfp,
}

impl AlgoArg {
    fn to_core(self) -> Algorithm {
        match self {
            AlgoArg::Apriori => Algorithm::Apriori,
            AlgoArg::Fpgrowth => Algorithm::FpGrowth,
            AlgoArg::MrApriori => Algorithm::MrApriori,
            AlgoArg::Pfp => Algorithm::Pfp,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum BackendArg {
    Sequential,
    Batch,
    Inmemory,
    Pipelined,
}

impl BackendArg {
    fn to_core(self) -> BackendKind {
        match self {
            BackendArg::Sequential => BackendKind::Sequential,
            BackendArg::Batch => BackendKind::BatchMaterialize,
            BackendArg::Inmemory => BackendKind::InMemoryIterative,
            BackendArg::Pipelined => BackendKind::Pipelined,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum FormatArg {
    Text,
    Csv,
    JsonLines,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum ChartByArg {
    Backend,
    Algorithm,
}

impl ChartByArg {
    fn to_core(self) -> ChartDimension {
        match self {
            ChartByArg::Backend => ChartDimension::Backend,
            ChartByArg::Algorithm => ChartDimension::Algorithm,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Mine(args) => commands::cmd_mine(args),
        Command::Bench(args) => commands::cmd_bench(args),
        Command::Gen(args) => commands::cmd_gen(args),
        Command::Inspect(args) => commands::cmd_inspect(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Maps a failure to the documented exit codes: 2 for bad flags or config,
/// 3 for verification mismatches, 1 for everything else (I/O, malformed
/// input files, runtime limits).
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(fim) = cause.downcast_ref::<FimError>() {
            return match fim {
                FimError::Config(_) | FimError::Input(_) => 2,
                FimError::Verification(_) => 3,
                FimError::Parse { .. } | FimError::Io(_) | FimError::IterationCap { .. } => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 1;
        }
    }
    1
}
