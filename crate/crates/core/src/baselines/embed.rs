//! Embedding-cosine ranking with a pluggable embedding provider.

use super::{rank, terms};

pub const HASHED_BUCKETS: usize = 1 << 15;

/// Maps text to a fixed-dimension vector.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// L2-normalized term counts over FNV-1a hashed buckets.
#[derive(Debug, Clone, Copy)]
pub struct HashedBagOfWords {
    buckets: usize,
}

impl HashedBagOfWords {
    pub fn new(buckets: usize) -> Self {
        assert!(buckets > 0, "bucket count must be positive");
        Self { buckets }
    }
}

impl Default for HashedBagOfWords {
    fn default() -> Self {
        Self::new(HASHED_BUCKETS)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

impl EmbeddingProvider for HashedBagOfWords {
    fn dim(&self) -> usize {
        self.buckets
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.buckets];
        for t in terms(text) {
            v[(fnv1a(t.as_bytes()) % self.buckets as u64) as usize] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Cosine similarity of every chunk to the query.
pub fn embed_scores<S: AsRef<str>>(chunks: &[S], query: &str, provider: &dyn EmbeddingProvider) -> Vec<f64> {
    let q = provider.embed(query);
    chunks.iter().map(|c| cosine(&provider.embed(c.as_ref()), &q)).collect()
}

/// Top `k` chunks by cosine similarity, returned as indices in document order.
pub fn embed_retrieve<S: AsRef<str>>(
    chunks: &[S],
    query: &str,
    k: usize,
    provider: &dyn EmbeddingProvider,
) -> Vec<usize> {
    let scores = embed_scores(chunks, query, provider);
    let mut top: Vec<usize> = rank(&scores).into_iter().take(k).collect();
    top.sort_unstable();
    top
}
