//! Comparison retrievers: head+tail truncation and chunk rankers.
//!
//! Chunk rankers (BM25, embedding cosine) work on groups of whole sentences
//! and return a [`RetrievalResult`] under the same token budget as the
//! reactive retriever, so ratios are directly comparable.

mod bm25;
mod embed;

pub use bm25::{bm25_retrieve, Bm25, BM25_B, BM25_K1};
pub use embed::{cosine, embed_retrieve, embed_scores, EmbeddingProvider, HashedBagOfWords, HASHED_BUCKETS};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::retrieval::{RetrievalRatio, RetrievalResult, SentenceSpan};
use crate::tokenization::TokenSequence;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BaselineError {
    #[error("chunk size and top-k must be at least 1")]
    ChunkingSpec,
    #[error("{scores} scores for {chunks} chunks")]
    ScoreCount { scores: usize, chunks: usize },
}

/// Head `floor(budget/2)` tokens followed by tail `ceil(budget/2)` tokens;
/// the sequence itself when it already fits.
pub fn truncate_middle(ctx: &TokenSequence, budget: usize) -> TokenSequence {
    let n = ctx.len();
    if n <= budget {
        return ctx.clone();
    }
    let head = budget / 2;
    let tail = budget - head;
    let mut ids = Vec::with_capacity(budget);
    ids.extend_from_slice(&ctx.ids[..head]);
    ids.extend_from_slice(&ctx.ids[n - tail..]);
    TokenSequence {
        tokenizer: ctx.tokenizer.clone(),
        ids,
        source_len: ctx.source_len,
    }
}

/// Chunks of roughly `approx_tokens` tokens, `top_k` of which are retrieved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingSpec {
    pub approx_tokens: usize,
    pub top_k: usize,
}

impl ChunkingSpec {
    pub fn new(approx_tokens: usize, top_k: usize) -> Result<Self, BaselineError> {
        if approx_tokens == 0 || top_k == 0 {
            return Err(BaselineError::ChunkingSpec);
        }
        Ok(Self { approx_tokens, top_k })
    }
}

/// A run of consecutive sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub sentences: Vec<SentenceSpan>,
}

impl Chunk {
    pub fn text(&self) -> String {
        let parts: Vec<&str> = self.sentences.iter().map(|s| s.text.as_str()).collect();
        parts.join(" ")
    }

    pub fn token_len(&self) -> usize {
        self.sentences.iter().map(SentenceSpan::token_len).sum()
    }
}

/// Groups sentences in order, closing a chunk once it holds at least
/// `approx_tokens` tokens. The last chunk may be shorter.
pub fn chunk_sentences(spans: &[SentenceSpan], approx_tokens: usize) -> Vec<Chunk> {
    let mut chunks = Vec::new();
    let mut current = Vec::new();
    let mut len = 0;
    for span in spans {
        len += span.token_len();
        current.push(span.clone());
        if len >= approx_tokens {
            chunks.push(Chunk { sentences: std::mem::take(&mut current) });
            len = 0;
        }
    }
    if !current.is_empty() {
        chunks.push(Chunk { sentences: current });
    }
    chunks
}

/// Indices sorted by descending score, ties by position.
pub(crate) fn rank(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Takes up to `top_k` chunks in score order, skipping any that no longer
/// fit the budget, and returns their sentences in document order.
pub fn select_chunks(
    chunks: &[Chunk],
    scores: &[f64],
    top_k: usize,
    budget: usize,
) -> Result<RetrievalResult, BaselineError> {
    if scores.len() != chunks.len() {
        return Err(BaselineError::ScoreCount { scores: scores.len(), chunks: chunks.len() });
    }
    let mut remaining = budget;
    let mut taken = Vec::new();
    for i in rank(scores) {
        if taken.len() >= top_k {
            break;
        }
        let len = chunks[i].token_len();
        if len > 0 && len <= remaining {
            remaining -= len;
            taken.push(i);
        }
    }
    taken.sort_unstable();
    let total: usize = chunks.iter().map(Chunk::token_len).sum();
    let retrieved = budget - remaining;
    Ok(RetrievalResult {
        selected: taken.into_iter().flat_map(|i| chunks[i].sentences.iter().cloned()).collect(),
        retrieved_tokens: retrieved,
        total_tokens: total,
        retrieval_ratio: RetrievalRatio::new(total, retrieved),
    })
}

/// Lowercased whitespace terms with leading and trailing punctuation removed.
pub fn terms(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}
