//! Tokenizer contract shared by alignment, attention and every retriever.
//!
//! Token ids are opaque: nothing downstream interprets an id, only the
//! behaviour of [`Tokenizer::encode`] and [`Tokenizer::decode`]. Note that
//! `encode(decode(ids))` is *not* required to reproduce `ids`; tokenizers
//! with merges that span a sentence boundary break that symmetry, which is
//! the case sentence alignment has to cope with.

mod reference;
mod sidecar;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use reference::ReferenceBpe;
pub use sidecar::{SidecarEncoding, SidecarTokenizer, TokenizationSidecar};

/// Name of the bundled merge-capable byte-pair tokenizer.
pub const REFERENCE_BPE: &str = "reference-bpe";
/// Name of the bundled byte-level tokenizer (no merges).
pub const REFERENCE_BYTES: &str = "reference-bytes";

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("unknown tokenizer `{0}`")]
    UnknownTokenizer(String),
    #[error("tokenizer id must be non-empty")]
    EmptyId,
    #[error("token range {from}..{to} out of bounds for sequence of length {len}")]
    OutOfBounds { from: usize, to: usize, len: usize },
    #[error("token id {0} is not in the vocabulary")]
    UnknownId(u32),
    #[error("tokenizer `{tokenizer}` has no encoding for text {text:?}")]
    UnknownText { tokenizer: String, text: String },
    #[error("sequence was produced by `{found}`, not `{expected}`")]
    Mismatch { expected: String, found: String },
    #[error("invalid merge table line {line}: {reason}")]
    MergeTable { line: usize, reason: String },
    #[error("sidecar: {0}")]
    Sidecar(String),
}

/// Stable name of a tokenizer configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TokenizerId(String);

impl TokenizerId {
    pub fn new(name: impl Into<String>) -> Result<Self, TokenizerError> {
        let name = name.into();
        if name.is_empty() {
            return Err(TokenizerError::EmptyId);
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for TokenizerId {
    type Error = TokenizerError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<TokenizerId> for String {
    fn from(id: TokenizerId) -> Self {
        id.0
    }
}

impl fmt::Display for TokenizerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A text encoded under a named tokenizer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokenizer: TokenizerId,
    pub ids: Vec<u32>,
    /// Character count of the text this sequence was encoded from.
    pub source_len: usize,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Sub-sequence `[from, to)`, keeping the tokenizer tag.
    pub fn slice(&self, from: usize, to: usize) -> Result<TokenSequence, TokenizerError> {
        check_range(from, to, self.len())?;
        Ok(TokenSequence {
            tokenizer: self.tokenizer.clone(),
            ids: self.ids[from..to].to_vec(),
            source_len: 0,
        })
    }
}

pub(crate) fn check_range(from: usize, to: usize, len: usize) -> Result<(), TokenizerError> {
    if from > to || to > len {
        return Err(TokenizerError::OutOfBounds { from, to, len });
    }
    Ok(())
}

/// Encode/decode over text. Implementations are immutable once built and
/// may be shared freely between threads.
pub trait Tokenizer: Send + Sync {
    fn id(&self) -> &TokenizerId;

    fn encode(&self, text: &str) -> Result<TokenSequence, TokenizerError>;

    /// Surface text of a run of token ids.
    fn decode_ids(&self, ids: &[u32]) -> Result<String, TokenizerError>;

    /// Decodes tokens `[from, to)` of `seq`.
    fn decode(&self, seq: &TokenSequence, from: usize, to: usize) -> Result<String, TokenizerError> {
        if &seq.tokenizer != self.id() {
            return Err(TokenizerError::Mismatch {
                expected: self.id().to_string(),
                found: seq.tokenizer.to_string(),
            });
        }
        check_range(from, to, seq.len())?;
        self.decode_ids(&seq.ids[from..to])
    }
}

/// Name → tokenizer lookup.
#[derive(Clone, Default)]
pub struct TokenizerRegistry {
    tokenizers: BTreeMap<String, Arc<dyn Tokenizer>>,
}

impl TokenizerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding the two bundled reference tokenizers.
    pub fn with_defaults() -> Self {
        let mut registry = Self::new();
        registry.register(Arc::new(ReferenceBpe::standard()));
        registry.register(Arc::new(ReferenceBpe::bytes_only()));
        registry
    }

    pub fn register(&mut self, tokenizer: Arc<dyn Tokenizer>) {
        self.tokenizers
            .insert(tokenizer.id().as_str().to_string(), tokenizer);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Tokenizer>, TokenizerError> {
        self.tokenizers
            .get(name)
            .cloned()
            .ok_or_else(|| TokenizerError::UnknownTokenizer(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tokenizers.keys().map(String::as_str)
    }

    pub fn encode(&self, text: &str, tokenizer: &TokenizerId) -> Result<TokenSequence, TokenizerError> {
        self.get(tokenizer.as_str())?.encode(text)
    }
}

impl fmt::Debug for TokenizerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.tokenizers.keys()).finish()
    }
}
