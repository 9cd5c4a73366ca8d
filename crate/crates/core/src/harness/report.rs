//! Aggregated evaluation report: JSON for machines, a text table for people.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::pipeline::{Method, RecordOutcome, RecordOutput};
use crate::easy::{AlignmentReport, SentenceScore};
use crate::retrieval::{MeanMode, RetrievalRatio};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub tokenizer: String,
    pub provider: String,
    pub seed: u64,
    pub budget: usize,
    pub cap_fraction: f64,
    pub mean_mode: MeanMode,
    pub tol: usize,
    pub window: usize,
}

/// Alignment quality pooled over every sentence of every aligned record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSummary {
    pub records: usize,
    pub failed: usize,
    pub sentences: usize,
    pub match_rate: f64,
    pub mean_levenshtein: f64,
    pub mean_levenshtein_nonzero: f64,
}

impl AlignmentSummary {
    pub fn pool<'a>(reports: impl IntoIterator<Item = &'a AlignmentReport>, failed: usize) -> Self {
        let mut records = 0;
        let mut scores: Vec<SentenceScore> = Vec::new();
        for r in reports {
            records += 1;
            scores.extend_from_slice(&r.per_sentence);
        }
        let pooled = AlignmentReport::from_scores(scores);
        Self {
            records,
            failed,
            sentences: pooled.per_sentence.len(),
            match_rate: pooled.match_rate,
            mean_levenshtein: pooled.mean_levenshtein,
            mean_levenshtein_nonzero: pooled.mean_levenshtein_nonzero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub doc_id: String,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieved_tokens: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_tokens: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval_ratio: Option<RetrievalRatio>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub needle_recall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RecordRow {
    pub fn new(method: Method, outcome: &RecordOutcome<RecordOutput>) -> Self {
        match outcome {
            RecordOutcome::Ok(o) => Self {
                doc_id: o.doc_id.clone(),
                method,
                retrieved_tokens: Some(o.retrieved_tokens),
                total_tokens: Some(o.total_tokens),
                retrieval_ratio: Some(o.retrieval_ratio),
                needle_recall: o.needle_recall,
                error: None,
            },
            RecordOutcome::Failed { doc_id, error } => Self {
                doc_id: doc_id.clone(),
                method,
                retrieved_tokens: None,
                total_tokens: None,
                retrieval_ratio: None,
                needle_recall: None,
                error: Some(error.clone()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub records: usize,
    pub failed: usize,
    /// `INF` if any record retrieved nothing.
    pub mean_retrieval_ratio: RetrievalRatio,
    pub mean_retrieved_tokens: f64,
    /// Mean over records that carry needles.
    pub needle_recall: Option<f64>,
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

impl MethodSummary {
    pub fn from_rows<'a>(method: Method, rows: impl IntoIterator<Item = &'a RecordRow>) -> Self {
        let mut failed = 0;
        let mut ratios = Vec::new();
        let mut tokens = Vec::new();
        let mut recalls = Vec::new();
        for row in rows {
            if row.error.is_some() {
                failed += 1;
                continue;
            }
            ratios.extend(row.retrieval_ratio.map(|r| r.0));
            tokens.extend(row.retrieved_tokens.map(|t| t as f64));
            recalls.extend(row.needle_recall);
        }
        Self {
            method,
            records: tokens.len(),
            failed,
            mean_retrieval_ratio: RetrievalRatio(mean(&ratios).unwrap_or(f64::INFINITY)),
            mean_retrieved_tokens: mean(&tokens).unwrap_or(0.0),
            needle_recall: mean(&recalls),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub settings: ReportSettings,
    pub alignment: AlignmentSummary,
    pub methods: Vec<MethodSummary>,
    pub records: Vec<RecordRow>,
}

impl Report {
    /// Builds summaries from rows; methods keep the order given.
    pub fn new(settings: ReportSettings, alignment: AlignmentSummary, methods: &[Method], rows: Vec<RecordRow>) -> Self {
        let summaries = methods
            .iter()
            .map(|&m| MethodSummary::from_rows(m, rows.iter().filter(|r| r.method == m)))
            .collect();
        Self { settings, alignment, methods: summaries, records: rows }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count() + self.alignment.failed
    }

    /// Fixed-width summary table; ratios and means to 2 decimals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let a = &self.alignment;
        let _ = writeln!(
            out,
            "alignment: {} sentences in {} records, match {:.2}%, mean lev {:.2}, non-zero mean lev {:.2}",
            a.sentences,
            a.records,
            a.match_rate * 100.0,
            a.mean_levenshtein,
            a.mean_levenshtein_nonzero
        );
        let _ = writeln!(
            out,
            "{:<16} {:>8} {:>7} {:>11} {:>11} {:>8}",
            "method", "records", "failed", "retr.ratio", "avg.tokens", "recall"
        );
        for m in &self.methods {
            let recall = m.needle_recall.map_or("-".to_string(), |r| format!("{r:.2}"));
            let _ = writeln!(
                out,
                "{:<16} {:>8} {:>7} {:>11} {:>11.2} {:>8}",
                m.method.to_string(),
                m.records,
                m.failed,
                m.mean_retrieval_ratio.to_string(),
                m.mean_retrieved_tokens,
                recall
            );
        }
        out
    }
}
