//! Sentence segmentation.
//!
//! Alignment only needs *some* segmentation that is independent of the
//! model tokenizer. The bundled rule splits after a run of `.`, `?` or `!`
//! when the run is followed by whitespace and an uppercase letter, or by the
//! end of the text. Pre-split sentences from an external segmenter can be
//! supplied through the corpus `sentences` field instead.

use serde::{Deserialize, Serialize};

pub const RULE_SPLITTER: &str = "rule-v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceList {
    pub sentences: Vec<String>,
    pub splitter: String,
}

impl SentenceList {
    /// Wraps sentences produced elsewhere, dropping blank entries.
    pub fn external(sentences: Vec<String>, splitter: impl Into<String>) -> Self {
        Self {
            sentences: sentences.into_iter().filter(|s| !s.trim().is_empty()).collect(),
            splitter: splitter.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Splits `text` with the rule splitter.
pub fn split_sentences(text: &str) -> SentenceList {
    let sentences = sentence_offsets(text)
        .into_iter()
        .map(|(start, end)| text[start..end].to_string())
        .collect();
    SentenceList {
        sentences,
        splitter: RULE_SPLITTER.to_string(),
    }
}

/// Byte ranges of each trimmed sentence in `text`.
pub fn sentence_offsets(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut cuts = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !is_terminator(chars[i].1) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && is_terminator(chars[j].1) {
            j += 1;
        }
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let at_end = k == chars.len();
        let next_is_capital = k > j && k < chars.len() && chars[k].1.is_uppercase();
        if at_end || next_is_capital {
            let cut = chars.get(j).map_or(text.len(), |&(b, _)| b);
            cuts.push(cut);
        }
        i = j;
    }
    if cuts.last() != Some(&text.len()) {
        cuts.push(text.len());
    }

    let mut spans = Vec::with_capacity(cuts.len());
    let mut start = 0;
    for cut in cuts {
        let segment = &text[start..cut];
        let lead = segment.len() - segment.trim_start().len();
        let trimmed = segment.trim();
        if !trimmed.is_empty() {
            spans.push((start + lead, start + lead + trimmed.len()));
        }
        start = cut;
    }
    spans
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

/// Trims and collapses every whitespace run to a single space.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
