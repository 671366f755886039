mod commands;
mod transcript;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hippo_core::SignatureMode;

#[derive(Parser, Debug)]
#[command(name = "hippo", version, about = "Append-only agent memory over wavelet matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Append every turn of a transcript to a store, creating it if absent.
    Ingest {
        store: PathBuf,
        transcript: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Retrieve the entries matching a natural-language query.
    Query {
        store: PathBuf,
        text: String,
        #[command(flatten)]
        search: SearchArgs,
        /// Also print the context assembled within this many tokens.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Print store statistics.
    Stats { store: PathBuf },
    /// Check the store against independent oracles.
    Verify {
        store: PathBuf,
        /// Probes per suite.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run every query of a file (one per line) and report latency and tokens.
    Bench {
        store: PathBuf,
        queries: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        /// Write per-query records as tab-separated text.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
}

/// Model parameters, fixed when a store is created.
#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// Vocabulary capacity.
    #[arg(long)]
    pub sigma: Option<usize>,
    /// Embedding dimensionality.
    #[arg(long)]
    pub dims: Option<usize>,
    /// Signature bits (at most 128).
    #[arg(long)]
    pub bits: Option<usize>,
    /// Non-zero entries per base vector.
    #[arg(long)]
    pub nnz: Option<usize>,
    /// Context tokens on each side.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Hyperplane,
    Topd,
}

impl From<ModeArg> for SignatureMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Hyperplane => SignatureMode::Hyperplane,
            ModeArg::Topd => SignatureMode::TopD,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SearchArgs {
    /// Hamming radius of each keyword ball.
    #[arg(long, default_value_t = 2)]
    pub radius: u32,
    #[arg(long, default_value_t = 5)]
    pub topk: usize,
    /// Fraction of keywords an entry must contain.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, value_enum, default_value_t = ExtractorArg::Default)]
    pub extractor: ExtractorArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractorArg {
    /// Stopword filtering, no network.
    Default,
    /// Chat-completion endpoint from HIPPO_EXTRACTOR_URL.
    External,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Ingest {
            store,
            transcript,
            model,
        } => commands::ingest(&store, &transcript, &model),
        Command::Query {
            store,
            text,
            search,
            budget,
        } => commands::query(&store, &text, &search, budget),
        Command::Stats { store } => commands::stats(&store),
        Command::Verify {
            store,
            samples,
            seed,
        } => commands::verify(&store, samples, seed),
        Command::Bench {
            store,
            queries,
            search,
            report,
            threads,
        } => commands::bench(&store, &queries, &search, report.as_deref(), threads),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
