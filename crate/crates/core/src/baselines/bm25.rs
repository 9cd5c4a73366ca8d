//! Okapi BM25 over lowercased whitespace terms.

use std::collections::HashMap;

use super::{rank, terms};

pub const BM25_K1: f64 = 1.5;
pub const BM25_B: f64 = 0.75;

#[derive(Debug, Clone)]
pub struct Bm25 {
    docs: Vec<HashMap<String, usize>>,
    lens: Vec<usize>,
    df: HashMap<String, usize>,
    avgdl: f64,
}

impl Bm25 {
    pub fn new<S: AsRef<str>>(docs: &[S]) -> Self {
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut counts = Vec::with_capacity(docs.len());
        let mut lens = Vec::with_capacity(docs.len());
        for doc in docs {
            let words = terms(doc.as_ref());
            lens.push(words.len());
            let mut tf: HashMap<String, usize> = HashMap::new();
            for w in words {
                *tf.entry(w).or_default() += 1;
            }
            for term in tf.keys() {
                *df.entry(term.clone()).or_default() += 1;
            }
            counts.push(tf);
        }
        let total: usize = lens.iter().sum();
        let avgdl = if docs.is_empty() { 0.0 } else { total as f64 / docs.len() as f64 };
        Self { docs: counts, lens, df, avgdl }
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = self.df.get(term).copied().unwrap_or(0) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// Score of every document against `query`; repeated query terms count
    /// once per occurrence.
    pub fn scores(&self, query: &str) -> Vec<f64> {
        let query = terms(query);
        self.docs
            .iter()
            .zip(&self.lens)
            .map(|(tf, &len)| {
                let norm = if self.avgdl > 0.0 { len as f64 / self.avgdl } else { 1.0 };
                query
                    .iter()
                    .map(|q| {
                        let f = tf.get(q).copied().unwrap_or(0) as f64;
                        if f == 0.0 {
                            return 0.0;
                        }
                        self.idf(q) * f * (BM25_K1 + 1.0) / (f + BM25_K1 * (1.0 - BM25_B + BM25_B * norm))
                    })
                    .sum()
            })
            .collect()
    }
}

/// Top `k` chunks by BM25 score (ties to the earlier chunk), returned as
/// indices in document order.
pub fn bm25_retrieve<S: AsRef<str>>(chunks: &[S], query: &str, k: usize) -> Vec<usize> {
    let scores = Bm25::new(chunks).scores(query);
    let mut top: Vec<usize> = rank(&scores).into_iter().take(k).collect();
    top.sort_unstable();
    top
}
