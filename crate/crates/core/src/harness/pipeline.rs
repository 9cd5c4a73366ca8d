//! Per-record orchestration: split, encode, align, then retrieve with one of
//! several methods.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::corpus::{CorpusRecord, ValidationError};
use crate::attention::{reaction_vector, AttentionError, AttentionProvider};
use crate::baselines::{
    chunk_sentences, embed_scores, select_chunks, truncate_middle, BaselineError, Bm25, ChunkingSpec,
    EmbeddingProvider, HashedBagOfWords,
};
use crate::easy::{easy_align, score_alignment, AlignError, AlignmentReport, BoundaryList};
use crate::exec::Execution;
use crate::retrieval::{
    greedy_retrieve, join_prompt, score_sentences, RetrievalConfig, RetrievalError, RetrievalRatio, SentenceSpan,
};
use crate::sentence_split::{normalize_whitespace, split_sentences, SentenceList};
use crate::tokenization::{TokenSequence, Tokenizer, TokenizerError, TokenizerId};

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("invalid record: {0}")]
    Invalid(#[from] ValidationError),
    #[error("tokenizer: {0}")]
    Tokenizer(#[from] TokenizerError),
    #[error("alignment: {0}")]
    Align(#[from] AlignError),
    #[error("attention: {0}")]
    Attention(#[from] AttentionError),
    #[error("retrieval: {0}")]
    Retrieval(#[from] RetrievalError),
    #[error("baseline: {0}")]
    Baseline(#[from] BaselineError),
}

/// A retrieval method run by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Reactive,
    Truncate,
    Bm25(ChunkingSpec),
    Embed(ChunkingSpec),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Reactive => f.write_str("reactive"),
            Method::Truncate => f.write_str("trunc"),
            Method::Bm25(c) => write!(f, "bm25_{}_{}", c.approx_tokens, c.top_k),
            Method::Embed(c) => write!(f, "embed_{}_{}", c.approx_tokens, c.top_k),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown method {0:?} (expected reactive, trunc, bm25_X_Y or embed_X_Y)")]
pub struct MethodParseError(String);

impl FromStr for Method {
    type Err = MethodParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MethodParseError(s.to_string());
        match s {
            "reactive" => return Ok(Method::Reactive),
            "trunc" => return Ok(Method::Truncate),
            _ => {}
        }
        let mut parts = s.split('_');
        let kind = parts.next().ok_or_else(bad)?;
        let x = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let y = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        let spec = ChunkingSpec::new(x, y).map_err(|_| bad())?;
        match kind {
            "bm25" => Ok(Method::Bm25(spec)),
            "embed" => Ok(Method::Embed(spec)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub retrieval: RetrievalConfig,
    pub tol: usize,
    pub window: usize,
    pub task_prompt: String,
    pub exec: Execution,
}

impl PipelineConfig {
    pub fn new(budget: usize) -> Self {
        Self {
            retrieval: RetrievalConfig::new(budget),
            tol: crate::easy::DEFAULT_TOL,
            window: 4096,
            task_prompt: String::new(),
            exec: Execution::default(),
        }
    }
}

/// A record after splitting, encoding and alignment; shared by all methods.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub id: String,
    pub question: String,
    pub needles: Option<Vec<String>>,
    pub context: TokenSequence,
    pub query: TokenSequence,
    pub boundaries: BoundaryList,
    pub spans: Vec<SentenceSpan>,
    pub alignment: AlignmentReport,
}

/// Splits (unless the record carries sentences), encodes and aligns.
pub fn prepare(record: &CorpusRecord, tokenizer: &dyn Tokenizer, tol: usize) -> Result<Prepared, RecordError> {
    record.validate()?;
    let sentences = match &record.sentences {
        Some(s) => SentenceList::external(s.clone(), "external"),
        None => split_sentences(&record.context),
    };
    let context = tokenizer.encode(&record.context)?;
    let query = tokenizer.encode(&record.question)?;
    let boundaries = easy_align(tokenizer, &context, &sentences.sentences, tol)?;
    let alignment = score_alignment(tokenizer, &context, &sentences.sentences, &boundaries)?;
    let spans = boundaries
        .spans()
        .zip(sentences.sentences)
        .enumerate()
        .map(|(index, ((start, end), text))| SentenceSpan { index, text, start, end })
        .collect();
    Ok(Prepared {
        id: record.id.clone(),
        question: record.question.clone(),
        needles: record.needles.clone(),
        context,
        query,
        boundaries,
        spans,
        alignment,
    })
}

/// Outcome of one method on one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordOutput {
    pub doc_id: String,
    pub method: Method,
    /// Sentence-level selections; empty for truncation.
    pub selected: Vec<SentenceSpan>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scores: Vec<f64>,
    pub retrieved_tokens: usize,
    pub total_tokens: usize,
    pub retrieval_ratio: RetrievalRatio,
    pub retrieved_text: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub needle_recall: Option<f64>,
}

/// Fraction of `needles` found (whitespace-normalized) inside `retrieved`;
/// `None` when there are no needles.
pub fn needle_recall(retrieved: &str, needles: &[String]) -> Option<f64> {
    if needles.is_empty() {
        return None;
    }
    let hay = normalize_whitespace(retrieved);
    let found = needles
        .iter()
        .filter(|n| {
            let n = normalize_whitespace(n);
            !n.is_empty() && hay.contains(&n)
        })
        .count();
    Some(found as f64 / needles.len() as f64)
}

/// Runs `method` on a prepared record.
pub fn run_method(
    prepared: &Prepared,
    method: Method,
    tokenizer: &dyn Tokenizer,
    provider: &dyn AttentionProvider,
    embedder: &dyn EmbeddingProvider,
    cfg: &PipelineConfig,
    exec: Execution,
) -> Result<RecordOutput, RecordError> {
    let budget = cfg.retrieval.budget;
    let total = prepared.context.len();
    let (result, scores) = match method {
        Method::Reactive => {
            let rv = reaction_vector(&prepared.context, &prepared.query, provider, cfg.window, exec)?;
            let scored = score_sentences(&rv, prepared.spans.clone(), cfg.retrieval.mean_mode)?;
            let scores = scored.iter().map(|s| s.score).collect();
            (greedy_retrieve(&scored, &cfg.retrieval)?, scores)
        }
        Method::Truncate => {
            cfg.retrieval.validate()?;
            let out = truncate_middle(&prepared.context, budget);
            let text = if out.len() == total {
                tokenizer.decode_ids(&out.ids)?
            } else {
                let head = budget / 2;
                let tail = &out.ids[head..];
                format!("{} {}", tokenizer.decode_ids(&out.ids[..head])?, tokenizer.decode_ids(tail)?)
            };
            return Ok(finish(prepared, method, cfg, Vec::new(), Vec::new(), out.len(), text));
        }
        Method::Bm25(spec) | Method::Embed(spec) => {
            cfg.retrieval.validate()?;
            let chunks = chunk_sentences(&prepared.spans, spec.approx_tokens);
            let texts: Vec<String> = chunks.iter().map(|c| c.text()).collect();
            let scores = match method {
                Method::Bm25(_) => Bm25::new(&texts).scores(&prepared.question),
                _ => embed_scores(&texts, &prepared.question, embedder),
            };
            (select_chunks(&chunks, &scores, spec.top_k, budget)?, Vec::new())
        }
    };
    let result = result.with_total_tokens(total);
    let text = result.text();
    Ok(finish(prepared, method, cfg, result.selected, scores, result.retrieved_tokens, text))
}

fn finish(
    prepared: &Prepared,
    method: Method,
    cfg: &PipelineConfig,
    selected: Vec<SentenceSpan>,
    scores: Vec<f64>,
    retrieved: usize,
    text: String,
) -> RecordOutput {
    let total = prepared.context.len();
    RecordOutput {
        doc_id: prepared.id.clone(),
        method,
        selected,
        scores,
        retrieved_tokens: retrieved,
        total_tokens: total,
        retrieval_ratio: RetrievalRatio::new(total, retrieved),
        prompt: join_prompt(&cfg.task_prompt, &text, &prepared.question),
        needle_recall: prepared.needles.as_deref().and_then(|n| needle_recall(&text, n)),
        retrieved_text: text,
    }
}

/// Either a record's output or the error that stopped it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RecordOutcome<T> {
    Ok(T),
    Failed { doc_id: String, error: String },
}

impl<T> RecordOutcome<T> {
    pub fn is_ok(&self) -> bool {
        matches!(self, RecordOutcome::Ok(_))
    }
}

fn sorted_by_id(records: &[CorpusRecord]) -> Vec<&CorpusRecord> {
    let mut sorted: Vec<&CorpusRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    sorted
}

/// Execution for work inside one record: parallel only when the records
/// themselves are not spread over the pool.
fn inner(exec: Execution, records: usize) -> Execution {
    if records > 1 {
        Execution::Sequential
    } else {
        exec
    }
}

/// Prepares every record, sorted by id. Failures are kept per record.
pub fn prepare_all(
    records: &[CorpusRecord],
    tokenizer: &dyn Tokenizer,
    tol: usize,
    exec: Execution,
) -> Vec<(String, Result<Prepared, RecordError>)> {
    exec.map(&sorted_by_id(records), |r| (r.id.clone(), prepare(r, tokenizer, tol)))
}

/// Runs `method` over prepared records, preserving their order.
pub fn run_prepared(
    prepared: &[(String, Result<Prepared, RecordError>)],
    method: Method,
    tokenizer: &dyn Tokenizer,
    provider: &dyn AttentionProvider,
    embedder: &dyn EmbeddingProvider,
    cfg: &PipelineConfig,
) -> Vec<RecordOutcome<RecordOutput>> {
    let inner = inner(cfg.exec, prepared.len());
    cfg.exec.map(prepared, |(id, p)| {
        let out = match p {
            Ok(p) => run_method(p, method, tokenizer, provider, embedder, cfg, inner).map_err(|e| e.to_string()),
            Err(e) => Err(e.to_string()),
        };
        match out {
            Ok(o) => RecordOutcome::Ok(o),
            Err(error) => RecordOutcome::Failed { doc_id: id.clone(), error },
        }
    })
}

/// End-to-end reactive retrieval over a corpus, one outcome per record in id
/// order.
pub fn run_pipeline(
    records: &[CorpusRecord],
    tokenizer: &dyn Tokenizer,
    provider: &dyn AttentionProvider,
    cfg: &PipelineConfig,
) -> Vec<RecordOutcome<RecordOutput>> {
    let prepared = prepare_all(records, tokenizer, cfg.tol, cfg.exec);
    run_prepared(&prepared, Method::Reactive, tokenizer, provider, &HashedBagOfWords::default(), cfg)
}

/// Alignment of one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignOutput {
    pub doc_id: String,
    pub tokenizer: TokenizerId,
    pub tokens: usize,
    pub boundaries: Vec<usize>,
    pub match_rate: f64,
    pub mean_levenshtein: f64,
    pub mean_levenshtein_nonzero: f64,
}

pub fn align_records(
    records: &[CorpusRecord],
    tokenizer: &dyn Tokenizer,
    tol: usize,
    exec: Execution,
) -> Vec<RecordOutcome<AlignOutput>> {
    prepare_all(records, tokenizer, tol, exec)
        .into_iter()
        .map(|(doc_id, p)| match p {
            Ok(p) => RecordOutcome::Ok(AlignOutput {
                doc_id,
                tokenizer: p.context.tokenizer.clone(),
                tokens: p.context.len(),
                boundaries: p.boundaries.boundaries,
                match_rate: p.alignment.match_rate,
                mean_levenshtein: p.alignment.mean_levenshtein,
                mean_levenshtein_nonzero: p.alignment.mean_levenshtein_nonzero,
            }),
            Err(e) => RecordOutcome::Failed { doc_id, error: e.to_string() },
        })
        .collect()
}
