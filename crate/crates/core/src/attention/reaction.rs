use std::ops::Range;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{AttentionError, AttentionProvider, DumpRecord, Pass};
use crate::exec::Execution;
use crate::tokenization::TokenSequence;

/// Per-context-token attention shift caused by appending the query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionVector {
    pub values: Vec<f64>,
    pub context_hash: String,
    pub query_hash: String,
}

impl ReactionVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// SHA-256 over the ids as little-endian `u32`s.
pub fn sequence_digest(ids: &[u32]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for id in ids {
        hasher.update(id.to_le_bytes());
    }
    hasher.finalize().into()
}

/// Context chunks for a `window`-token model: each chunk leaves room for the
/// query, the last one may be shorter.
pub fn chunk_ranges(context_len: usize, query_len: usize, window: usize) -> Result<Vec<Range<usize>>, AttentionError> {
    if window <= query_len {
        return Err(AttentionError::WindowTooSmall { window, query: query_len });
    }
    let size = window - query_len;
    Ok((0..context_len)
        .step_by(size)
        .map(|start| start..(start + size).min(context_len))
        .collect())
}

/// Reaction vector of `context` against `query`.
///
/// When context and query together fit in `window`, this is one pair of
/// passes. Otherwise the context is cut by [`chunk_ranges`], each chunk gets
/// its own pair of passes, and the per-chunk slices are concatenated in
/// order.
pub fn reaction_vector(
    context: &TokenSequence,
    query: &TokenSequence,
    provider: &dyn AttentionProvider,
    window: usize,
    exec: Execution,
) -> Result<ReactionVector, AttentionError> {
    if context.is_empty() {
        return Err(AttentionError::EmptyContext);
    }
    let ranges = chunk_ranges(context.len(), query.len(), window)?;
    let slices = exec.map(&ranges, |range| {
        chunk_reaction(&context.ids[range.clone()], &query.ids, provider)
    });
    let mut values = Vec::with_capacity(context.len());
    for slice in slices {
        values.extend(slice?);
    }
    Ok(ReactionVector {
        values,
        context_hash: hex::encode(sequence_digest(&context.ids)),
        query_hash: hex::encode(sequence_digest(&query.ids)),
    })
}

fn chunk_reaction(chunk: &[u32], query: &[u32], provider: &dyn AttentionProvider) -> Result<Vec<f64>, AttentionError> {
    let with_query: Vec<u32> = chunk.iter().chain(query).copied().collect();
    let alone = fetch(provider, chunk, Pass::Context)?;
    let joined = fetch(provider, &with_query, Pass::ContextQuery)?;
    Ok(alone
        .iter()
        .zip(&joined[..chunk.len()])
        .map(|(a, b)| (a - b).abs())
        .collect())
}

fn fetch(provider: &dyn AttentionProvider, ids: &[u32], pass: Pass) -> Result<Vec<f64>, AttentionError> {
    let vec = provider
        .attn_vec(ids, pass)
        .map_err(|source| AttentionError::Provider { pass, source })?;
    if vec.values.len() != ids.len() {
        return Err(AttentionError::ProviderLength {
            expected: ids.len(),
            found: vec.values.len(),
        });
    }
    Ok(vec.values)
}

/// Every dump record needed to compute the reaction vector of `context`
/// against `query` under `window`, evaluated with `provider`.
pub fn export_passes(
    context: &[u32],
    query: &[u32],
    provider: &dyn AttentionProvider,
    window: usize,
) -> Result<Vec<DumpRecord>, AttentionError> {
    let mut records = Vec::new();
    for range in chunk_ranges(context.len(), query.len(), window)? {
        let chunk = &context[range];
        let with_query: Vec<u32> = chunk.iter().chain(query).copied().collect();
        for (ids, pass) in [(chunk.to_vec(), Pass::Context), (with_query, Pass::ContextQuery)] {
            let values = fetch(provider, &ids, pass)?;
            records.push(DumpRecord {
                digest: sequence_digest(&ids),
                pass,
                ids,
                values: values.into_iter().map(|v| v as f32).collect(),
            });
        }
    }
    Ok(records)
}
