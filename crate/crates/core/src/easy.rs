//! EASY: mapping independently segmented sentences onto one token sequence.
//!
//! For each target sentence the candidate boundary is the encoded length of
//! all sentences processed so far (normalized, joined by single spaces). The candidate is
//! then wiggled one token at a time: if the decoded span `[m, c)` equals the
//! target it is accepted, if it is still a substring of the target the span
//! grows, otherwise it shrinks. Revisiting an index, running past the
//! sequence, or drifting more than `tol` from the initial candidate restores
//! the initial candidate. Every sentence therefore gets exactly one boundary.
//!
//! All comparisons run on whitespace-normalized text (trimmed, internal runs
//! collapsed).

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sentence_split::normalize_whitespace;
use crate::tokenization::{TokenSequence, Tokenizer, TokenizerError};

pub const DEFAULT_TOL: usize = 30;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("cannot align {0} sentences against an empty token sequence")]
    EmptySequence(usize),
    #[error("wiggle tolerance must be at least 1")]
    ZeroTolerance,
    #[error("{boundaries} boundaries for {targets} target sentences")]
    LengthMismatch { boundaries: usize, targets: usize },
    #[error("boundaries must be non-decreasing and at most {len}")]
    InvalidBoundaries { len: usize },
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
}

/// One token index per target sentence. Sentence `i` covers
/// `[boundaries[i-1], boundaries[i])`, with an implicit leading 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryList {
    pub boundaries: Vec<usize>,
    pub tol: usize,
}

impl BoundaryList {
    pub fn len(&self) -> usize {
        self.boundaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundaries.is_empty()
    }

    /// Half-open token span of every sentence.
    pub fn spans(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let starts = std::iter::once(0).chain(self.boundaries.iter().copied());
        starts.zip(self.boundaries.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// The decoded span matched the target.
    Matched,
    /// Wiggling gave up; the initial candidate was kept.
    Restored,
}

/// How one sentence's boundary was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentenceTrace {
    /// Initial candidate after clamping into `[m, |seq|]`.
    pub candidate: usize,
    pub boundary: usize,
    /// Passes through the wiggle loop, including the one that terminated it.
    pub iterations: usize,
    pub outcome: Outcome,
}

/// The texts whose encoded lengths seed each candidate: for sentence `i`,
/// targets `0..=i` whitespace-normalized and joined by single spaces (blank
/// targets contribute nothing). External tokenizations must record these.
pub fn candidate_prefixes<S: AsRef<str>>(targets: &[S]) -> Vec<String> {
    let mut processed = String::new();
    targets
        .iter()
        .map(|t| {
            let t = normalize_whitespace(t.as_ref());
            if !t.is_empty() {
                if !processed.is_empty() {
                    processed.push(' ');
                }
                processed.push_str(&t);
            }
            processed.clone()
        })
        .collect()
}

/// Aligns `targets` against `seq` with wiggle tolerance `tol`.
pub fn easy_align<S: AsRef<str>>(
    tokenizer: &dyn Tokenizer,
    seq: &TokenSequence,
    targets: &[S],
    tol: usize,
) -> Result<BoundaryList, AlignError> {
    easy_align_traced(tokenizer, seq, targets, tol).map(|(list, _)| list)
}

/// [`easy_align`] plus a per-sentence trace.
pub fn easy_align_traced<S: AsRef<str>>(
    tokenizer: &dyn Tokenizer,
    seq: &TokenSequence,
    targets: &[S],
    tol: usize,
) -> Result<(BoundaryList, Vec<SentenceTrace>), AlignError> {
    if tol == 0 {
        return Err(AlignError::ZeroTolerance);
    }
    if targets.is_empty() {
        return Ok((BoundaryList { boundaries: Vec::new(), tol }, Vec::new()));
    }
    if seq.is_empty() {
        return Err(AlignError::EmptySequence(targets.len()));
    }

    let len = seq.len();
    let decode_norm = |from: usize, to: usize| -> Result<String, TokenizerError> {
        if to <= from {
            return Ok(String::new());
        }
        tokenizer.decode(seq, from, to).map(|s| normalize_whitespace(&s))
    };

    let mut boundaries = Vec::with_capacity(targets.len());
    let mut traces = Vec::with_capacity(targets.len());
    let prefixes = candidate_prefixes(targets);
    let mut m = 0usize;
    let mut visited = HashSet::new();

    for (target, processed) in targets.iter().zip(&prefixes) {
        let want = normalize_whitespace(target.as_ref());

        // Clamp into [m, len]: the encoded prefix may disagree with the
        // document, but the boundary list must stay legal and monotone.
        let candidate = tokenizer.encode(processed)?.len().min(len).max(m);
        let mut c = candidate;
        let mut iterations = 0;
        visited.clear();

        let outcome = loop {
            iterations += 1;
            if visited.contains(&c) || c > len || c.abs_diff(candidate) > tol {
                c = candidate;
                break Outcome::Restored;
            }
            visited.insert(c);
            let got = decode_norm(m, c)?;
            if got == want {
                break Outcome::Matched;
            } else if want.contains(got.as_str()) {
                c += 1;
            } else {
                // `got` is non-empty here, so c > m >= 0.
                c -= 1;
            }
        };

        // Several indices can match when tokens decode to nothing after
        // normalization; keep the smallest.
        if outcome == Outcome::Matched {
            while c > m && decode_norm(m, c - 1)? == want {
                c -= 1;
            }
        }

        boundaries.push(c);
        traces.push(SentenceTrace {
            candidate,
            boundary: c,
            iterations,
            outcome,
        });
        m = c;
    }

    Ok((BoundaryList { boundaries, tol }, traces))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceScore {
    pub matched: bool,
    pub distance: usize,
}

/// Alignment quality: exact-match rate and Levenshtein distances between the
/// decoded span and the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub match_rate: f64,
    pub mean_levenshtein: f64,
    /// Mean over sentences with a non-zero distance; 0 when all matched.
    pub mean_levenshtein_nonzero: f64,
    pub per_sentence: Vec<SentenceScore>,
}

impl AlignmentReport {
    pub fn from_scores(per_sentence: Vec<SentenceScore>) -> Self {
        let total = per_sentence.len();
        if total == 0 {
            return Self {
                match_rate: 1.0,
                mean_levenshtein: 0.0,
                mean_levenshtein_nonzero: 0.0,
                per_sentence,
            };
        }
        let matched = per_sentence.iter().filter(|s| s.distance == 0).count();
        let sum: usize = per_sentence.iter().map(|s| s.distance).sum();
        let nonzero = total - matched;
        Self {
            match_rate: matched as f64 / total as f64,
            mean_levenshtein: sum as f64 / total as f64,
            mean_levenshtein_nonzero: if nonzero == 0 { 0.0 } else { sum as f64 / nonzero as f64 },
            per_sentence,
        }
    }

    pub fn total_distance(&self) -> usize {
        self.per_sentence.iter().map(|s| s.distance).sum()
    }
}

/// Scores `boundaries` against the targets they were aligned to.
pub fn score_alignment<S: AsRef<str>>(
    tokenizer: &dyn Tokenizer,
    seq: &TokenSequence,
    targets: &[S],
    boundaries: &BoundaryList,
) -> Result<AlignmentReport, AlignError> {
    if boundaries.len() != targets.len() {
        return Err(AlignError::LengthMismatch {
            boundaries: boundaries.len(),
            targets: targets.len(),
        });
    }
    let len = seq.len();
    let monotone = boundaries.boundaries.windows(2).all(|w| w[0] <= w[1]);
    if !monotone || boundaries.boundaries.last().is_some_and(|&b| b > len) {
        return Err(AlignError::InvalidBoundaries { len });
    }

    let per_sentence = boundaries
        .spans()
        .zip(targets)
        .map(|((l, r), target)| {
            let got = normalize_whitespace(&tokenizer.decode(seq, l, r)?);
            let want = normalize_whitespace(target.as_ref());
            let distance = strsim::levenshtein(&got, &want);
            Ok(SentenceScore {
                matched: distance == 0,
                distance,
            })
        })
        .collect::<Result<Vec<_>, AlignError>>()?;
    Ok(AlignmentReport::from_scores(per_sentence))
}
