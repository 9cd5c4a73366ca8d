//! Sentence scoring and budgeted greedy selection.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::attention::ReactionVector;

/// Floor used by the geometric mean so zero entries stay finite.
pub const GEOMETRIC_EPS: f64 = 1e-12;
pub const DEFAULT_CAP_FRACTION: f64 = 0.8;

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("empty slice [{l}, {r})")]
    EmptySlice { l: usize, r: usize },
    #[error("slice [{l}, {r}) exceeds reaction vector of length {len}")]
    SliceOutOfRange { l: usize, r: usize, len: usize },
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("cap fraction {0} is outside (0, 1]")]
    CapFraction(f64),
    #[error("sentence {0} has a non-finite or negative score")]
    BadScore(usize),
}

/// A sentence and its half-open token range `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub index: usize,
    pub text: String,
    pub start: usize,
    pub end: usize,
}

impl SentenceSpan {
    pub fn token_len(&self) -> usize {
        self.end - self.start
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanMode {
    #[default]
    Arithmetic,
    Geometric,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanRule {
    /// Skip sentences that do not fit and keep scanning.
    #[default]
    SkipAndContinue,
    /// End the scan at the first sentence that does not fit.
    StopAtFirstMiss,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub budget: usize,
    pub cap_fraction: f64,
    pub mean_mode: MeanMode,
    pub scan: ScanRule,
}

impl RetrievalConfig {
    pub fn new(budget: usize) -> Self {
        Self {
            budget,
            cap_fraction: DEFAULT_CAP_FRACTION,
            mean_mode: MeanMode::default(),
            scan: ScanRule::default(),
        }
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.budget == 0 {
            return Err(RetrievalError::ZeroBudget);
        }
        if !(self.cap_fraction > 0.0 && self.cap_fraction <= 1.0) {
            return Err(RetrievalError::CapFraction(self.cap_fraction));
        }
        Ok(())
    }

    /// Maximum number of sentences selectable out of `n`.
    pub fn cap(&self, n: usize) -> usize {
        // The epsilon keeps products like 0.29 * 100 from flooring to 28.
        (self.cap_fraction * n as f64 + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSentence {
    pub span: SentenceSpan,
    pub score: f64,
}

impl ScoredSentence {
    pub fn token_len(&self) -> usize {
        self.span.token_len()
    }
}

/// Total over retrieved tokens. Infinite when nothing was retrieved, which
/// serializes as the string `"INF"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalRatio(pub f64);

impl RetrievalRatio {
    pub fn new(total: usize, retrieved: usize) -> Self {
        if retrieved == 0 {
            Self(f64::INFINITY)
        } else {
            Self(total as f64 / retrieved as f64)
        }
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl fmt::Display for RetrievalRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("INF")
        } else {
            write!(f, "{:.2}", self.0)
        }
    }
}

impl Serialize for RetrievalRatio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("INF")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for RetrievalRatio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Self(v)),
            Raw::Text(t) if t == "INF" => Ok(Self(f64::INFINITY)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad ratio {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    /// Selected spans in document order.
    pub selected: Vec<SentenceSpan>,
    pub retrieved_tokens: usize,
    pub total_tokens: usize,
    pub retrieval_ratio: RetrievalRatio,
}

impl RetrievalResult {
    /// Replaces the total (e.g. with the full context length when trailing
    /// tokens are not covered by any span) and recomputes the ratio.
    pub fn with_total_tokens(mut self, total: usize) -> Self {
        self.total_tokens = total;
        self.retrieval_ratio = RetrievalRatio::new(total, self.retrieved_tokens);
        self
    }

    /// Selected sentence texts joined by single spaces.
    pub fn text(&self) -> String {
        let parts: Vec<&str> = self.selected.iter().map(|s| s.text.as_str()).collect();
        parts.join(" ")
    }
}

/// Mean of `rv[l..r]`.
pub fn reaction_score(rv: &ReactionVector, l: usize, r: usize, mode: MeanMode) -> Result<f64, RetrievalError> {
    slice_score(&rv.values, l, r, mode)
}

fn slice_score(values: &[f64], l: usize, r: usize, mode: MeanMode) -> Result<f64, RetrievalError> {
    if l >= r {
        return Err(RetrievalError::EmptySlice { l, r });
    }
    if r > values.len() {
        return Err(RetrievalError::SliceOutOfRange { l, r, len: values.len() });
    }
    let slice = &values[l..r];
    let n = slice.len() as f64;
    Ok(match mode {
        MeanMode::Arithmetic => slice.iter().sum::<f64>() / n,
        MeanMode::Geometric => (slice.iter().map(|x| (x + GEOMETRIC_EPS).ln()).sum::<f64>() / n).exp(),
    })
}

/// Scores every span; empty spans get 0 and are never selected.
pub fn score_sentences(
    rv: &ReactionVector,
    spans: Vec<SentenceSpan>,
    mode: MeanMode,
) -> Result<Vec<ScoredSentence>, RetrievalError> {
    spans
        .into_iter()
        .map(|span| {
            let score = if span.start == span.end {
                if span.end > rv.len() {
                    return Err(RetrievalError::SliceOutOfRange { l: span.start, r: span.end, len: rv.len() });
                }
                0.0
            } else {
                reaction_score(rv, span.start, span.end, mode)?
            };
            Ok(ScoredSentence { span, score })
        })
        .collect()
}

/// Greedy budgeted selection.
///
/// Sentences are visited by descending score, ties going to the earlier
/// sentence. A sentence is taken when it fits the remaining budget; the scan
/// ends when the budget is spent, `cfg.cap(N)` sentences are taken, or (under
/// [`ScanRule::StopAtFirstMiss`]) a sentence does not fit. The selection is
/// returned in document order. `total_tokens` is the summed span length.
pub fn greedy_retrieve(scored: &[ScoredSentence], cfg: &RetrievalConfig) -> Result<RetrievalResult, RetrievalError> {
    cfg.validate()?;
    if let Some(bad) = scored.iter().position(|s| !(s.score.is_finite() && s.score >= 0.0)) {
        return Err(RetrievalError::BadScore(bad));
    }
    let cap = cfg.cap(scored.len());
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| {
        scored[b]
            .score
            .total_cmp(&scored[a].score)
            .then(scored[a].span.start.cmp(&scored[b].span.start))
            .then(a.cmp(&b))
    });

    let mut remaining = cfg.budget;
    let mut taken = Vec::new();
    for i in order {
        if taken.len() >= cap || remaining == 0 {
            break;
        }
        let len = scored[i].token_len();
        if len == 0 {
            continue;
        }
        if len <= remaining {
            remaining -= len;
            taken.push(i);
        } else if cfg.scan == ScanRule::StopAtFirstMiss {
            break;
        }
    }
    taken.sort_by_key(|&i| (scored[i].span.start, i));

    let total: usize = scored.iter().map(|s| s.token_len()).sum();
    let retrieved = cfg.budget - remaining;
    Ok(RetrievalResult {
        selected: taken.into_iter().map(|i| scored[i].span.clone()).collect(),
        retrieved_tokens: retrieved,
        total_tokens: total,
        retrieval_ratio: RetrievalRatio::new(total, retrieved),
    })
}

/// Task prompt, retrieved context, and question, separated by blank lines.
/// Empty parts are left out.
pub fn assemble_prompt(task_prompt: &str, result: &RetrievalResult, question: &str) -> String {
    join_prompt(task_prompt, &result.text(), question)
}

/// [`assemble_prompt`] for an already-rendered context.
pub fn join_prompt(task_prompt: &str, context: &str, question: &str) -> String {
    let parts: Vec<&str> = [task_prompt, context, question]
        .into_iter()
        .filter(|p| !p.is_empty())
        .collect();
    parts.join("\n\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rv(values: Vec<f64>) -> ReactionVector {
        ReactionVector {
            values,
            context_hash: String::new(),
            query_hash: String::new(),
        }
    }

    fn scored(scores: &[f64], lens: &[usize]) -> Vec<ScoredSentence> {
        let mut start = 0;
        scores
            .iter()
            .zip(lens)
            .enumerate()
            .map(|(index, (&score, &len))| {
                let span = SentenceSpan {
                    index,
                    text: format!("s{}", index + 1),
                    start,
                    end: start + len,
                };
                start += len;
                ScoredSentence { span, score }
            })
            .collect()
    }

    fn indices(result: &RetrievalResult) -> Vec<usize> {
        result.selected.iter().map(|s| s.index).collect()
    }

    #[test]
    fn constant_slice_scores_the_same_in_both_modes() {
        let v = rv(vec![0.5, 0.5, 0.5]);
        assert_eq!(reaction_score(&v, 0, 3, MeanMode::Arithmetic).unwrap(), 0.5);
        let g = reaction_score(&v, 0, 3, MeanMode::Geometric).unwrap();
        assert!((g - 0.5).abs() < 1e-11);
    }

    #[test]
    fn arithmetic_pair() {
        let v = rv(vec![0.1, 0.4]);
        assert!((reaction_score(&v, 0, 2, MeanMode::Arithmetic).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn geometric_handles_zeros() {
        let v = rv(vec![0.0, 1.0]);
        let g = reaction_score(&v, 0, 2, MeanMode::Geometric).unwrap();
        assert!(g > 0.0 && g < 1e-5);
    }

    #[test]
    fn slice_errors() {
        let v = rv(vec![1.0; 3]);
        assert_eq!(
            reaction_score(&v, 2, 2, MeanMode::Arithmetic),
            Err(RetrievalError::EmptySlice { l: 2, r: 2 })
        );
        assert_eq!(
            reaction_score(&v, 1, 4, MeanMode::Arithmetic),
            Err(RetrievalError::SliceOutOfRange { l: 1, r: 4, len: 3 })
        );
    }

    #[test]
    fn three_sentence_trace() {
        // Scan order 3 (0.9), 1 (0.5), 2 (0.1); budget 20 takes 3 then 1.
        let s = scored(&[0.5, 0.1, 0.9], &[10, 10, 10]);
        let r = greedy_retrieve(&s, &RetrievalConfig::new(20)).unwrap();
        assert_eq!(indices(&r), vec![0, 2]);
        assert_eq!(r.retrieved_tokens, 20);
        assert_eq!(r.total_tokens, 30);
        assert_eq!(r.retrieval_ratio, RetrievalRatio(1.5));
    }

    #[test]
    fn cap_of_five_is_four() {
        let s = scored(&[0.1, 0.2, 0.3, 0.4, 0.5], &[3; 5]);
        let r = greedy_retrieve(&s, &RetrievalConfig::new(usize::MAX)).unwrap();
        assert_eq!(indices(&r), vec![1, 2, 3, 4]);
    }

    #[test]
    fn nothing_fits() {
        let s = scored(&[0.3, 0.2], &[5, 6]);
        let r = greedy_retrieve(&s, &RetrievalConfig::new(4)).unwrap();
        assert!(r.selected.is_empty());
        assert_eq!(r.retrieved_tokens, 0);
        assert!(r.retrieval_ratio.is_infinite());
        assert_eq!(serde_json::to_string(&r.retrieval_ratio).unwrap(), "\"INF\"");
    }

    #[test]
    fn empty_input() {
        let r = greedy_retrieve(&[], &RetrievalConfig::new(10)).unwrap();
        assert!(r.selected.is_empty());
        assert!(r.retrieval_ratio.is_infinite());
    }

    #[test]
    fn skip_versus_stop() {
        // Highest score does not fit; the next one does.
        let s = scored(&[0.9, 0.5, 0.1], &[10, 4, 4]);
        let mut cfg = RetrievalConfig::new(8);
        assert_eq!(indices(&greedy_retrieve(&s, &cfg).unwrap()), vec![1, 2]);
        cfg.scan = ScanRule::StopAtFirstMiss;
        assert!(greedy_retrieve(&s, &cfg).unwrap().selected.is_empty());
    }

    #[test]
    fn ties_go_to_the_earlier_sentence() {
        let s = scored(&[0.5, 0.5, 0.5], &[5, 5, 5]);
        let r = greedy_retrieve(&s, &RetrievalConfig::new(10)).unwrap();
        assert_eq!(indices(&r), vec![0, 1]);
    }

    #[test]
    fn empty_spans_are_never_selected() {
        let s = scored(&[0.9, 0.1], &[0, 3]);
        let r = greedy_retrieve(&s, &RetrievalConfig::new(10)).unwrap();
        assert_eq!(indices(&r), vec![1]);
    }

    #[test]
    fn config_validation() {
        let s = scored(&[0.1], &[1]);
        let mut cfg = RetrievalConfig::new(0);
        assert_eq!(greedy_retrieve(&s, &cfg), Err(RetrievalError::ZeroBudget));
        cfg.budget = 1;
        cfg.cap_fraction = 1.5;
        assert_eq!(greedy_retrieve(&s, &cfg), Err(RetrievalError::CapFraction(1.5)));
        cfg.cap_fraction = 0.8;
        let bad = scored(&[f64::NAN], &[1]);
        assert_eq!(greedy_retrieve(&bad, &cfg), Err(RetrievalError::BadScore(0)));
    }

    #[test]
    fn cap_rounding() {
        let mut cfg = RetrievalConfig::new(1);
        assert_eq!(cfg.cap(2), 1);
        assert_eq!(cfg.cap(10), 8);
        cfg.cap_fraction = 0.29;
        assert_eq!(cfg.cap(100), 29);
    }

    #[test]
    fn prompt_layout() {
        let s = scored(&[0.9, 0.1, 0.5], &[4, 4, 4]);
        let mut s = s;
        s[0].span.text = "I am an amazing researcher.".into();
        s[2].span.text = "I like LLM.".into();
        let r = greedy_retrieve(&s, &RetrievalConfig::new(8)).unwrap();
        assert_eq!(
            assemble_prompt("Answer briefly.", &r, "Who am I?"),
            "Answer briefly.\n\nI am an amazing researcher. I like LLM.\n\nWho am I?"
        );
        let none = greedy_retrieve(&s, &RetrievalConfig::new(1)).unwrap();
        assert_eq!(assemble_prompt("Task.", &none, "Q?"), "Task.\n\nQ?");
    }

    #[test]
    fn ratio_serde() {
        let json = serde_json::to_string(&RetrievalRatio(3.5)).unwrap();
        assert_eq!(json, "3.5");
        let back: RetrievalRatio = serde_json::from_str("\"INF\"").unwrap();
        assert!(back.is_infinite());
        assert_eq!(RetrievalRatio(3.391).to_string(), "3.39");
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<usize>, usize)> {
        (1usize..12).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.0f64..1.0, n),
                proptest::collection::vec(0usize..20, n),
                1usize..80,
            )
        })
    }

    proptest! {
        #[test]
        fn budget_cap_and_order((scores, lens, budget) in instance()) {
            let s = scored(&scores, &lens);
            let cfg = RetrievalConfig::new(budget);
            let r = greedy_retrieve(&s, &cfg).unwrap();
            prop_assert!(r.retrieved_tokens <= budget);
            prop_assert!(r.selected.len() <= cfg.cap(s.len()));
            prop_assert!(r.selected.windows(2).all(|w| w[0].start < w[1].start));
            let sum: usize = r.selected.iter().map(|x| x.token_len()).sum();
            prop_assert_eq!(sum, r.retrieved_tokens);
        }

        #[test]
        fn greedy_dominance((scores, lens, budget) in instance()) {
            let s = scored(&scores, &lens);
            let cfg = RetrievalConfig::new(budget);
            let r = greedy_retrieve(&s, &cfg).unwrap();
            let chosen: Vec<usize> = indices(&r);
            if chosen.len() < cfg.cap(s.len()) {
                let min_chosen = chosen.iter().map(|&i| s[i].score).fold(f64::INFINITY, f64::min);
                let spare = budget - r.retrieved_tokens;
                for (i, x) in s.iter().enumerate() {
                    if chosen.contains(&i) || x.token_len() == 0 {
                        continue;
                    }
                    // An unselected sentence that outranks a selected one must
                    // not have fit even the final leftover budget.
                    if x.score > min_chosen {
                        prop_assert!(x.token_len() > spare);
                    }
                }
            }
        }

        #[test]
        fn monotone_transform_keeps_selection((scores, lens, budget) in instance()) {
            let s = scored(&scores, &lens);
            let t: Vec<ScoredSentence> = s
                .iter()
                .cloned()
                .map(|mut x| { x.score = (x.score * 3.0).exp(); x })
                .collect();
            let cfg = RetrievalConfig::new(budget);
            prop_assert_eq!(greedy_retrieve(&s, &cfg).unwrap(), greedy_retrieve(&t, &cfg).unwrap());
        }
    }
}
