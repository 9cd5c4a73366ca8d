//! Tokenizations exported from an external model.
//!
//! The core never links a model's tokenizer. Instead an exporter writes a
//! JSON sidecar with the token surfaces it used and every encoding the
//! pipeline will ask for: each full context, each query, and every sentence
//! prefix alignment re-encodes (see [`crate::easy::candidate_prefixes`]).
//!
//! ```json
//! {
//!   "format": "tokenization-sidecar/1",
//!   "tokenizer": "external:llama3",
//!   "vocab": {"13": ".T", "383": "he"},
//!   "encodings": [{"text": ".The", "ids": [13, 383]}]
//! }
//! ```

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TokenSequence, Tokenizer, TokenizerError, TokenizerId};

pub const SIDECAR_FORMAT: &str = "tokenization-sidecar/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SidecarEncoding {
    pub text: String,
    pub ids: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenizationSidecar {
    pub format: String,
    pub tokenizer: TokenizerId,
    /// Token id → surface text. Tokens that are not valid UTF-8 on their
    /// own should carry their lossy decoding.
    pub vocab: BTreeMap<u32, String>,
    pub encodings: Vec<SidecarEncoding>,
}

/// A [`Tokenizer`] backed by a [`TokenizationSidecar`]: `encode` answers
/// only texts the exporter recorded.
#[derive(Debug, Clone)]
pub struct SidecarTokenizer {
    id: TokenizerId,
    vocab: HashMap<u32, String>,
    encodings: HashMap<String, Vec<u32>>,
}

impl SidecarTokenizer {
    pub fn from_sidecar(sidecar: TokenizationSidecar) -> Result<Self, TokenizerError> {
        if sidecar.format != SIDECAR_FORMAT {
            return Err(TokenizerError::Sidecar(format!(
                "unsupported format `{}`, expected `{SIDECAR_FORMAT}`",
                sidecar.format
            )));
        }
        let vocab: HashMap<u32, String> = sidecar.vocab.into_iter().collect();
        let mut encodings = HashMap::with_capacity(sidecar.encodings.len());
        for enc in sidecar.encodings {
            if let Some(&bad) = enc.ids.iter().find(|id| !vocab.contains_key(id)) {
                return Err(TokenizerError::UnknownId(bad));
            }
            if let Some(prev) = encodings.insert(enc.text.clone(), enc.ids.clone()) {
                if prev != enc.ids {
                    return Err(TokenizerError::Sidecar(format!(
                        "conflicting encodings for {:?}",
                        enc.text
                    )));
                }
            }
        }
        Ok(Self {
            id: sidecar.tokenizer,
            vocab,
            encodings,
        })
    }

    pub fn load(path: &Path) -> Result<Self, TokenizerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TokenizerError::Sidecar(format!("{}: {e}", path.display())))?;
        let sidecar: TokenizationSidecar =
            serde_json::from_str(&text).map_err(|e| TokenizerError::Sidecar(e.to_string()))?;
        Self::from_sidecar(sidecar)
    }
}

impl Tokenizer for SidecarTokenizer {
    fn id(&self) -> &TokenizerId {
        &self.id
    }

    fn encode(&self, text: &str) -> Result<TokenSequence, TokenizerError> {
        if text.is_empty() {
            return Ok(TokenSequence {
                tokenizer: self.id.clone(),
                ids: Vec::new(),
                source_len: 0,
            });
        }
        let ids = self
            .encodings
            .get(text)
            .ok_or_else(|| TokenizerError::UnknownText {
                tokenizer: self.id.to_string(),
                text: text.to_string(),
            })?;
        Ok(TokenSequence {
            tokenizer: self.id.clone(),
            ids: ids.clone(),
            source_len: text.chars().count(),
        })
    }

    // A slice that cuts a multi-character token still yields that token's
    // whole surface: surfaces are the unit of decoding.
    fn decode_ids(&self, ids: &[u32]) -> Result<String, TokenizerError> {
        ids.iter()
            .map(|id| self.vocab.get(id).map(String::as_str).ok_or(TokenizerError::UnknownId(*id)))
            .collect()
    }
}
