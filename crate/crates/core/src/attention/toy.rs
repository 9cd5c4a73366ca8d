//! A seeded single-layer attention model for hermetic runs.
//!
//! Each token id maps to a fixed pseudo-random embedding with entries in
//! `[-1, 1]`. Every head uses one projection for both queries and keys, so a
//! token attends most strongly to other occurrences of itself; the
//! projection scale is chosen so that the expected self logit equals
//! [`ToyConfig::self_logit`].

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{attn_vec, AttentionError, AttentionProvider, AttnVec, HeadProjection, HiddenStates, Pass, ProjectionWeights, ProviderError};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyConfig {
    pub seed: u64,
    pub model_dim: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub self_logit: f64,
    pub causal: bool,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model_dim: 64,
            heads: 2,
            head_dim: 32,
            self_logit: 12.0,
            causal: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyTransformer {
    id: String,
    config: ToyConfig,
    weights: ProjectionWeights,
}

impl ToyTransformer {
    pub fn new(config: ToyConfig) -> Result<Self, AttentionError> {
        if config.model_dim == 0 || config.heads == 0 || config.head_dim == 0 {
            return Err(AttentionError::Shape("toy model dimensions must be positive".into()));
        }
        if !config.self_logit.is_finite() || config.self_logit <= 0.0 {
            return Err(AttentionError::NonFinite("self_logit"));
        }
        // Var(W) = 3·L / (√d_head · d) makes E[|Wx|²]/√d_head = L for x ~ U[-1,1]^d.
        let var = 3.0 * config.self_logit / ((config.head_dim as f64).sqrt() * config.model_dim as f64);
        // Uniform on [-a, a] has variance a²/3.
        let half_width = (3.0 * var).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, u64::MAX));
        let heads = (0..config.heads)
            .map(|_| {
                let w = Array2::from_shape_fn((config.model_dim, config.head_dim), |_| {
                    rng.random_range(-half_width..=half_width)
                });
                HeadProjection {
                    query: w.clone(),
                    key: w,
                }
            })
            .collect();
        Ok(Self {
            id: format!("toy:seed={}", config.seed),
            config,
            weights: ProjectionWeights::new(heads)?,
        })
    }

    pub fn config(&self) -> &ToyConfig {
        &self.config
    }

    pub fn weights(&self) -> &ProjectionWeights {
        &self.weights
    }

    /// Embedding of one token id.
    pub fn embedding(&self, id: u32) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, id as u64));
        (0..self.config.model_dim)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect()
    }

    pub fn hidden_states(&self, ids: &[u32]) -> Result<HiddenStates, AttentionError> {
        let d = self.config.model_dim;
        let flat: Vec<f64> = ids.iter().flat_map(|&id| self.embedding(id)).collect();
        let states = Array2::from_shape_vec((ids.len(), d), flat)
            .map_err(|e| AttentionError::Shape(e.to_string()))?;
        HiddenStates::new(states)
    }
}

impl AttentionProvider for ToyTransformer {
    fn id(&self) -> &str {
        &self.id
    }

    fn attn_vec(&self, ids: &[u32], _pass: Pass) -> Result<AttnVec, ProviderError> {
        let states = self.hidden_states(ids).map_err(Box::new)?;
        let values = attn_vec(&states, &self.weights, self.config.causal).map_err(Box::new)?;
        Ok(AttnVec {
            values,
            provenance: format!("{};layer=0", self.id),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = ToyTransformer::new(ToyConfig::default()).unwrap();
        let b = ToyTransformer::new(ToyConfig::default()).unwrap();
        let c = ToyTransformer::new(ToyConfig { seed: 1, ..ToyConfig::default() }).unwrap();
        let ids = [5, 9, 300, 5];
        assert_eq!(a.attn_vec(&ids, Pass::Context).unwrap(), b.attn_vec(&ids, Pass::Context).unwrap());
        assert_ne!(a.attn_vec(&ids, Pass::Context).unwrap().values, c.attn_vec(&ids, Pass::Context).unwrap().values);
    }

    #[test]
    fn repeated_token_draws_attention() {
        let toy = ToyTransformer::new(ToyConfig::default()).unwrap();
        let ids: Vec<u32> = (100..140).chain(std::iter::once(117)).collect();
        let states = toy.hidden_states(&ids).unwrap();
        let m = &super::super::attn_matrix(&states, toy.weights(), true).unwrap()[0];
        let last = m.row(ids.len() - 1);
        let (argmax, _) = last
            .iter()
            .enumerate()
            .take(ids.len() - 1)
            .fold((0, f64::MIN), |best, (j, &v)| if v > best.1 { (j, v) } else { best });
        assert_eq!(argmax, 17);
    }

    #[test]
    fn empty_ids_are_an_error() {
        let toy = ToyTransformer::new(ToyConfig::default()).unwrap();
        assert!(toy.attn_vec(&[], Pass::Context).is_err());
    }

    #[test]
    fn rejects_degenerate_config() {
        assert!(ToyTransformer::new(ToyConfig { heads: 0, ..ToyConfig::default() }).is_err());
        assert!(ToyTransformer::new(ToyConfig { self_logit: f64::NAN, ..ToyConfig::default() }).is_err());
    }
}
