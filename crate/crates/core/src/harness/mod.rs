//! Corpus ingestion, pipeline orchestration, metrics and reports.

mod corpus;
mod pipeline;
mod report;
pub mod synthetic;

pub use corpus::{load_corpus, parse_corpus, write_jsonl, CorpusError, CorpusRecord, ValidationError};
pub use pipeline::{
    align_records, needle_recall, prepare, prepare_all, run_method, run_pipeline, run_prepared, AlignOutput, Method,
    MethodParseError, PipelineConfig, Prepared, RecordError, RecordOutcome, RecordOutput,
};
pub use report::{AlignmentSummary, MethodSummary, RecordRow, Report, ReportSettings};

use crate::attention::AttentionProvider;
use crate::baselines::EmbeddingProvider;
use crate::tokenization::Tokenizer;

/// Runs every method over the corpus under one shared budget.
pub fn eval(
    records: &[CorpusRecord],
    tokenizer: &dyn Tokenizer,
    provider: &dyn AttentionProvider,
    embedder: &dyn EmbeddingProvider,
    cfg: &PipelineConfig,
    methods: &[Method],
    seed: u64,
) -> Report {
    let prepared = prepare_all(records, tokenizer, cfg.tol, cfg.exec);
    let failed = prepared.iter().filter(|(_, p)| p.is_err()).count();
    let alignment = AlignmentSummary::pool(prepared.iter().filter_map(|(_, p)| p.as_ref().ok()).map(|p| &p.alignment), failed);
    let mut rows = Vec::new();
    for &method in methods {
        for outcome in run_prepared(&prepared, method, tokenizer, provider, embedder, cfg) {
            rows.push(RecordRow::new(method, &outcome));
        }
    }
    let settings = ReportSettings {
        tokenizer: tokenizer.id().to_string(),
        provider: provider.id().to_string(),
        seed,
        budget: cfg.retrieval.budget,
        cap_fraction: cfg.retrieval.cap_fraction,
        mean_mode: cfg.retrieval.mean_mode,
        tol: cfg.tol,
        window: cfg.window,
    };
    Report::new(settings, alignment, methods, rows)
}
