use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "reactive", version, about = "Attention-reactive sentence retrieval and baselines")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Retrieval token budget, shared by every method.
    #[arg(long, global = true, env = "REACTIVE_BUDGET", default_value_t = 3500)]
    pub budget: usize,
    /// Maximum fraction of sentences that may be selected.
    #[arg(long, global = true, env = "REACTIVE_CAP_FRACTION", default_value_t = 0.8)]
    pub cap_fraction: f64,
    /// Alignment wiggle tolerance.
    #[arg(long, global = true, env = "REACTIVE_TOL", default_value_t = 30)]
    pub tol: usize,
    #[arg(long, global = true, env = "REACTIVE_MEAN_MODE", value_enum, default_value_t = MeanArg::Arithmetic)]
    pub mean_mode: MeanArg,
    #[arg(long, global = true, env = "REACTIVE_SCAN", value_enum, default_value_t = ScanArg::Skip)]
    pub scan: ScanArg,
    /// `toy` or `dump:<path>`.
    #[arg(long, global = true, env = "REACTIVE_PROVIDER", default_value = "toy")]
    pub provider: String,
    /// Seeds the toy model and synthetic corpora.
    #[arg(long, global = true, env = "REACTIVE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// `reference-bpe`, `reference-bytes` or `sidecar:<path>`.
    #[arg(long, global = true, env = "REACTIVE_TOKENIZER", default_value = "reference-bpe")]
    pub tokenizer: String,
    /// Model context window in tokens; longer contexts are chunked.
    #[arg(long, global = true, env = "REACTIVE_WINDOW", default_value_t = 4096)]
    pub window: usize,
    /// Process records one at a time.
    #[arg(long, global = true, env = "REACTIVE_SEQUENTIAL")]
    pub sequential: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MeanArg {
    Arithmetic,
    Geometric,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScanArg {
    /// Skip sentences that do not fit and keep going.
    Skip,
    /// Stop at the first sentence that does not fit.
    Stop,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BaselineArg {
    Trunc,
    Bm25,
    Embed,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SyntheticKind {
    /// Filler documents with planted keyword needles.
    Needle,
    /// Filler documents with some sentence junctions missing their space.
    Align,
}

#[derive(Debug, Args)]
pub struct Io {
    /// JSONL corpus.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Align sentences to token boundaries and score the alignment.
    Align(#[command(flatten)] Io),
    /// Run reactive retrieval over a corpus.
    Retrieve {
        #[command(flatten)]
        io: Io,
        /// Text placed before the retrieved context in each prompt.
        #[arg(long, default_value = "")]
        task_prompt: String,
    },
    /// Run a comparison retriever over a corpus.
    Baseline {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_enum)]
        method: BaselineArg,
        /// Approximate chunk size in tokens.
        #[arg(long, default_value_t = 128)]
        chunk: usize,
        /// Chunks to retrieve.
        #[arg(long, default_value_t = 3)]
        topk: usize,
        #[arg(long, default_value = "")]
        task_prompt: String,
    },
    /// Write a seeded synthetic corpus.
    GenSynthetic {
        #[arg(long, value_enum, default_value_t = SyntheticKind::Needle)]
        kind: SyntheticKind,
        #[arg(long, default_value_t = 20)]
        records: usize,
        /// Filler sentences per needle record, sentences per align record.
        #[arg(long, default_value_t = 40)]
        sentences: usize,
        /// Fraction of junctions written without a space (align kind).
        #[arg(long, default_value_t = 0.05)]
        merge_fraction: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare methods on a corpus under one budget and write a JSON report.
    Eval {
        #[command(flatten)]
        io: Io,
        /// Comma-separated: reactive, trunc, bm25_X_Y, embed_X_Y.
        #[arg(long, value_delimiter = ',', default_value = "reactive,trunc,bm25_128_3,embed_128_3")]
        methods: Vec<String>,
        /// Also print the summary table to stderr.
        #[arg(long)]
        table: bool,
    },
    /// Render a JSON report as a text table.
    Report {
        /// Report written by `eval`.
        #[arg(long)]
        input: PathBuf,
    },
}
