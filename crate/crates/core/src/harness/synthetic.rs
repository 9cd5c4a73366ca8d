//! Seeded synthetic corpora: alignment stress documents and needle corpora.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CorpusRecord;
use crate::seed::derive_seed;

/// Sentence openers for which the reference tokenizer encodes ". Word" and
/// ".Word" to the same number of tokens.
pub const STARTERS: [&str; 7] = ["The", "This", "We", "It", "Our", "She", "He"];

/// Lowercase filler vocabulary. No word uses u, z, q, x, j, k, v, w or y, so
/// filler never shares a byte token with [`keyword`] output.
pub const FILLER: [&str; 48] = [
    "stone", "garden", "table", "lamp", "bread", "candle", "harbor", "silent", "open", "mild", "ocean",
    "pencil", "lemon", "orange", "bottle", "hill", "listen", "road", "field", "grass", "clean", "rain",
    "island", "forest", "bridge", "bench", "plate", "metal", "cotton", "tiger", "drop", "chair", "sand",
    "salt", "flame", "tomato", "pepper", "ribbon", "hammer", "nail", "brash", "soap", "dinner", "spring",
    "season", "letter", "circle", "pattern",
];

const RARE_CONSONANTS: &[u8] = b"zqxjkvwy";

/// A pronounceable pseudo-word over rare consonants and `u`.
pub fn keyword(rng: &mut impl Rng) -> String {
    let len = rng.random_range(4..=6);
    (0..len)
        .map(|i| {
            if i % 2 == 1 {
                'u'
            } else {
                *RARE_CONSONANTS.choose(rng).expect("non-empty") as char
            }
        })
        .collect()
}

fn filler_sentence(rng: &mut impl Rng, min_words: usize, max_words: usize) -> String {
    let starter = STARTERS.choose(rng).expect("non-empty");
    let n = rng.random_range(min_words..=max_words);
    let words: Vec<&str> = (0..n).map(|_| *FILLER.choose(rng).expect("non-empty")).collect();
    format!("{starter} {}.", words.join(" "))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentCorpusConfig {
    pub docs: usize,
    pub sentences_per_doc: usize,
    /// Fraction of internal sentence junctions written without the space.
    pub merge_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentCorpus {
    pub records: Vec<CorpusRecord>,
    pub junctions: usize,
    pub merged: usize,
}

/// Documents of filler sentences with explicit sentence lists.
///
/// `floor(merge_fraction * junctions)` junctions are written as "end.Next"
/// instead of "end. Next". Merged junctions are never adjacent, so no
/// sentence touches two of them.
pub fn alignment_corpus(seed: u64, cfg: &AlignmentCorpusConfig) -> AlignmentCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let per_doc = cfg.sentences_per_doc.saturating_sub(1);
    let junctions = cfg.docs * per_doc;
    let target = (cfg.merge_fraction * junctions as f64 + 1e-9).floor() as usize;

    // Junction k of doc d sits between sentences k and k+1.
    let mut order: Vec<(usize, usize)> =
        (0..cfg.docs).flat_map(|d| (0..per_doc).map(move |k| (d, k))).collect();
    order.shuffle(&mut rng);
    let mut merged = vec![vec![false; per_doc]; cfg.docs];
    let mut count = 0;
    for (d, k) in order {
        if count == target {
            break;
        }
        let left = k > 0 && merged[d][k - 1];
        let right = k + 1 < per_doc && merged[d][k + 1];
        if !left && !right {
            merged[d][k] = true;
            count += 1;
        }
    }

    let records = (0..cfg.docs)
        .map(|d| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, d as u64 + 1));
            let sentences: Vec<String> =
                (0..cfg.sentences_per_doc).map(|_| filler_sentence(&mut rng, 4, 10)).collect();
            let mut context = String::new();
            for (k, s) in sentences.iter().enumerate() {
                if k > 0 && !merged[d][k - 1] {
                    context.push(' ');
                }
                context.push_str(s);
            }
            CorpusRecord {
                id: format!("align-{d:04}"),
                context,
                question: "What happened?".into(),
                answers: None,
                sentences: Some(sentences),
                needles: None,
            }
        })
        .collect();
    AlignmentCorpus { records, junctions, merged: count }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeedleConfig {
    pub records: usize,
    pub filler_sentences: usize,
    pub needles_per_record: usize,
    pub keywords_per_needle: usize,
    /// Needles land at fractional document positions in `[lo, hi]`.
    pub position: (f64, f64),
}

impl Default for NeedleConfig {
    fn default() -> Self {
        Self {
            records: 5,
            filler_sentences: 40,
            needles_per_record: 1,
            keywords_per_needle: 4,
            position: (0.3, 0.7),
        }
    }
}

/// Filler documents with planted keyword needles. Each question repeats the
/// needle keywords, and each needle occurs exactly once.
pub fn needle_corpus(seed: u64, cfg: &NeedleConfig) -> Vec<CorpusRecord> {
    (0..cfg.records)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64));
            let mut sentences: Vec<String> =
                (0..cfg.filler_sentences).map(|_| filler_sentence(&mut rng, 5, 12)).collect();
            let mut needles = Vec::with_capacity(cfg.needles_per_record);
            let mut echoed = Vec::new();
            for _ in 0..cfg.needles_per_record {
                let words: Vec<String> = (0..cfg.keywords_per_needle).map(|_| keyword(&mut rng)).collect();
                let starter = STARTERS.choose(&mut rng).expect("non-empty");
                let needle = format!("{starter} {}.", words.join(" "));
                let frac = rng.random_range(cfg.position.0..=cfg.position.1);
                let at = ((frac * sentences.len() as f64).round() as usize).min(sentences.len());
                sentences.insert(at, needle.clone());
                echoed.extend(words);
                needles.push(needle);
            }
            CorpusRecord {
                id: format!("needle-{r:04}"),
                context: sentences.join(" "),
                question: format!("What follows {}?", echoed.join(" ")),
                answers: None,
                sentences: Some(sentences),
                needles: Some(needles),
            }
        })
        .collect()
}
