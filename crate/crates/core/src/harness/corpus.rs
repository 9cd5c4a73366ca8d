//! JSONL corpus ingestion.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub context: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answers: Option<Vec<String>>,
    /// Pre-split sentences; the rule splitter is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentences: Option<Vec<String>>,
    /// Planted sentences for recall scoring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub needles: Option<Vec<String>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ValidationError {
    #[error("empty context")]
    EmptyContext,
    #[error("empty question")]
    EmptyQuestion,
    #[error("sentence list is present but empty")]
    EmptySentences,
}

impl CorpusRecord {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.context.trim().is_empty() {
            return Err(ValidationError::EmptyContext);
        }
        if self.question.trim().is_empty() {
            return Err(ValidationError::EmptyQuestion);
        }
        if self.sentences.as_ref().is_some_and(|s| s.iter().all(|x| x.trim().is_empty())) {
            return Err(ValidationError::EmptySentences);
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("line {line}: duplicate record id {id:?}")]
    DuplicateId { line: usize, id: String },
}

/// Parses one record per non-blank line. Records are validated later, per
/// record, so one bad record does not sink the corpus.
pub fn parse_corpus(text: &str) -> Result<Vec<CorpusRecord>, CorpusError> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord =
            serde_json::from_str(line).map_err(|source| CorpusError::Parse { line: i + 1, source })?;
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId { line: i + 1, id: record.id });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_corpus(path: &Path) -> Result<Vec<CorpusRecord>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&text)
}

/// One JSON object per line, newline terminated.
pub fn write_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("corpus types serialize"));
        out.push('\n');
    }
    out
}
