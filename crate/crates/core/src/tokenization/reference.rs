use std::collections::HashMap;

use super::{TokenSequence, Tokenizer, TokenizerError, TokenizerId, REFERENCE_BPE, REFERENCE_BYTES};

const STANDARD_MERGES: &str = include_str!("merges.txt");
const SPACE_MARK: char = 'Ġ';

/// Deterministic byte-level BPE with a fixed merge table.
///
/// Ids `0..256` are raw bytes; merge `k` of the table produces id `256 + k`.
/// Text is first cut into pieces made of a leading whitespace run followed by
/// a non-whitespace run, so merges never cross a space. A missing space after
/// a period therefore lets a merge like `.T` straddle two sentences.
#[derive(Debug, Clone)]
pub struct ReferenceBpe {
    id: TokenizerId,
    surfaces: Vec<Vec<u8>>,
    ranks: HashMap<(u32, u32), (usize, u32)>,
}

impl ReferenceBpe {
    /// The bundled `reference-bpe` tokenizer.
    pub fn standard() -> Self {
        Self::from_merge_table(REFERENCE_BPE, STANDARD_MERGES).expect("bundled merge table is valid")
    }

    /// `reference-bytes`: one token per byte.
    pub fn bytes_only() -> Self {
        Self::from_merge_table(REFERENCE_BYTES, "").expect("empty merge table is valid")
    }

    /// Builds a tokenizer from `left right` lines. Blank lines and lines
    /// starting with `#` are skipped. Both sides must already be in the
    /// vocabulary when their line is reached.
    pub fn from_merge_table(name: &str, table: &str) -> Result<Self, TokenizerError> {
        let mut surfaces: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
        let mut by_surface: HashMap<Vec<u8>, u32> =
            surfaces.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
        let mut ranks = HashMap::new();

        for (lineno, raw) in table.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: &str| TokenizerError::MergeTable {
                line: lineno + 1,
                reason: reason.to_string(),
            };
            let (left, right) = line.split_once(' ').ok_or_else(|| err("expected `left right`"))?;
            let (left, right) = (unmark(left), unmark(right));
            let l = *by_surface.get(&left).ok_or_else(|| err("left side not in vocabulary"))?;
            let r = *by_surface.get(&right).ok_or_else(|| err("right side not in vocabulary"))?;
            if ranks.contains_key(&(l, r)) {
                return Err(err("duplicate merge"));
            }
            let merged: Vec<u8> = left.iter().chain(right.iter()).copied().collect();
            let new_id = match by_surface.get(&merged) {
                Some(&existing) => existing,
                None => {
                    let id = surfaces.len() as u32;
                    surfaces.push(merged.clone());
                    by_surface.insert(merged, id);
                    id
                }
            };
            ranks.insert((l, r), (ranks.len(), new_id));
        }

        Ok(Self {
            id: TokenizerId::new(name)?,
            surfaces,
            ranks,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.surfaces.len()
    }

    /// Surface bytes of one token.
    pub fn surface(&self, id: u32) -> Option<&[u8]> {
        self.surfaces.get(id as usize).map(Vec::as_slice)
    }

    fn encode_piece(&self, piece: &[u8], out: &mut Vec<u32>) {
        let mut tokens: Vec<u32> = piece.iter().map(|&b| b as u32).collect();
        loop {
            let best = tokens
                .windows(2)
                .enumerate()
                .filter_map(|(pos, w)| self.ranks.get(&(w[0], w[1])).map(|&(rank, id)| (rank, pos, id)))
                .min();
            let Some((_, pos, id)) = best else { break };
            tokens[pos] = id;
            tokens.remove(pos + 1);
        }
        out.extend(tokens);
    }
}

fn unmark(s: &str) -> Vec<u8> {
    s.replace(SPACE_MARK, " ").into_bytes()
}

/// Splits into pieces of `whitespace* non-whitespace*`.
fn pieces(text: &str) -> impl Iterator<Item = &[u8]> {
    let bytes = text.as_bytes();
    let mut start = 0;
    std::iter::from_fn(move || {
        if start >= bytes.len() {
            return None;
        }
        let mut i = start;
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let piece = &bytes[start..i];
        start = i;
        Some(piece)
    })
}

impl Tokenizer for ReferenceBpe {
    fn id(&self) -> &TokenizerId {
        &self.id
    }

    fn encode(&self, text: &str) -> Result<TokenSequence, TokenizerError> {
        let mut ids = Vec::with_capacity(text.len() / 3 + 1);
        for piece in pieces(text) {
            self.encode_piece(piece, &mut ids);
        }
        Ok(TokenSequence {
            tokenizer: self.id.clone(),
            ids,
            source_len: text.chars().count(),
        })
    }

    fn decode_ids(&self, ids: &[u32]) -> Result<String, TokenizerError> {
        let mut bytes = Vec::new();
        for &id in ids {
            let surface = self.surface(id).ok_or(TokenizerError::UnknownId(id))?;
            bytes.extend_from_slice(surface);
        }
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }
}
