//! Attention vectors and reaction vectors.
//!
//! An attention vector is the per-column mean of a row-stochastic attention
//! matrix, averaged over heads. The reaction vector of a context is the
//! absolute difference between its attention vector alone and the first `c`
//! entries of the attention vector of context ⧺ query.
//!
//! The column mean divides by the matrix's row count, so a full-width
//! attention vector sums to 1.

mod dump;
mod reaction;
mod toy;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dump::{AttentionDump, DumpError, DumpHeader, DumpProvider, DumpRecord, DUMP_MAGIC, DUMP_VERSION};
pub use reaction::{chunk_ranges, export_passes, reaction_vector, sequence_digest, ReactionVector};
pub use toy::{ToyConfig, ToyTransformer};

#[derive(Debug, Error)]
pub enum AttentionError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("head list is empty")]
    NoHeads,
    #[error("head {head} has length {found}, expected {expected}")]
    HeadLength { head: usize, expected: usize, found: usize },
    #[error("column bound {upto} exceeds {cols} columns")]
    ColumnBound { upto: usize, cols: usize },
    #[error("context is empty")]
    EmptyContext,
    #[error("window {window} cannot hold a {query}-token query plus context")]
    WindowTooSmall { window: usize, query: usize },
    #[error("provider failed on the {pass} pass: {source}")]
    Provider {
        pass: Pass,
        #[source]
        source: ProviderError,
    },
    #[error("provider returned {found} values for a {expected}-token pass")]
    ProviderLength { expected: usize, found: usize },
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("no record for sequence {digest}")]
    UnknownSequence { digest: String },
    #[error("sequence {digest} has no `{pass}` pass in the dump")]
    MissingPass { digest: String, pass: Pass },
    #[error("layer selector {0} is not available")]
    Layer(LayerSelector),
    #[error(transparent)]
    Attention(#[from] Box<AttentionError>),
}

/// Which forward pass an attention vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pass {
    /// The context alone.
    #[serde(rename = "ctx")]
    Context,
    /// The context followed by the query.
    #[serde(rename = "ctx+query")]
    ContextQuery,
}

impl Pass {
    pub fn tag(self) -> u8 {
        match self {
            Pass::Context => 0,
            Pass::ContextQuery => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Pass::Context),
            1 => Some(Pass::ContextQuery),
            _ => None,
        }
    }
}

impl std::fmt::Display for Pass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pass::Context => "ctx",
            Pass::ContextQuery => "ctx+query",
        })
    }
}

/// Which transformer layer supplies attention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSelector {
    #[default]
    Last,
    Index(u32),
    MeanOverLayers,
}

impl std::fmt::Display for LayerSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LayerSelector::Last => f.write_str("last"),
            LayerSelector::Index(i) => write!(f, "{i}"),
            LayerSelector::MeanOverLayers => f.write_str("mean"),
        }
    }
}

/// Token representations, one row per position (`n × d`).
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStates(Array2<f64>);

impl HiddenStates {
    pub fn new(states: Array2<f64>) -> Result<Self, AttentionError> {
        if states.nrows() == 0 || states.ncols() == 0 {
            return Err(AttentionError::Shape(format!(
                "hidden states must be non-empty, got {}x{}",
                states.nrows(),
                states.ncols()
            )));
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(AttentionError::NonFinite("hidden states"));
        }
        Ok(Self(states))
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &HiddenStates) -> Result<HiddenStates, AttentionError> {
        if self.dim() != other.dim() {
            return Err(AttentionError::Shape(format!(
                "cannot concatenate d={} with d={}",
                self.dim(),
                other.dim()
            )));
        }
        let joined = ndarray::concatenate(Axis(0), &[self.0.view(), other.0.view()])
            .map_err(|e| AttentionError::Shape(e.to_string()))?;
        Ok(HiddenStates(joined))
    }
}

/// Query and key projections of one head, each `d × d_head`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadProjection {
    pub query: Array2<f64>,
    pub key: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionWeights {
    heads: Vec<HeadProjection>,
}

impl ProjectionWeights {
    pub fn new(heads: Vec<HeadProjection>) -> Result<Self, AttentionError> {
        let first = heads.first().ok_or(AttentionError::NoHeads)?;
        let shape = first.query.dim();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(AttentionError::Shape("projection must be at least 1x1".into()));
        }
        for (h, head) in heads.iter().enumerate() {
            if head.query.dim() != shape || head.key.dim() != shape {
                return Err(AttentionError::Shape(format!(
                    "head {h}: expected {}x{} query and key projections",
                    shape.0, shape.1
                )));
            }
            if head.query.iter().chain(head.key.iter()).any(|v| !v.is_finite()) {
                return Err(AttentionError::NonFinite("projection weights"));
            }
        }
        Ok(Self { heads })
    }

    pub fn heads(&self) -> &[HeadProjection] {
        &self.heads
    }

    pub fn head_count(&self) -> usize {
        self.heads.len()
    }

    pub fn model_dim(&self) -> usize {
        self.heads[0].query.nrows()
    }

    pub fn head_dim(&self) -> usize {
        self.heads[0].query.ncols()
    }
}

/// An attention vector with a note on where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttnVec {
    pub values: Vec<f64>,
    pub provenance: String,
}

/// Supplies attention vectors for token sequences.
pub trait AttentionProvider: Send + Sync {
    fn id(&self) -> &str;

    /// Attention vector over every position of `ids`.
    fn attn_vec(&self, ids: &[u32], pass: Pass) -> Result<AttnVec, ProviderError>;
}

/// Row-softmaxed `QKᵀ/√d_head` for every head.
///
/// With `causal`, position `i` attends only to `0..=i`; masked entries are
/// exactly zero.
pub fn attn_matrix(
    states: &HiddenStates,
    weights: &ProjectionWeights,
    causal: bool,
) -> Result<Vec<Array2<f64>>, AttentionError> {
    if states.dim() != weights.model_dim() {
        return Err(AttentionError::Shape(format!(
            "hidden dim {} does not match projection input dim {}",
            states.dim(),
            weights.model_dim()
        )));
    }
    let z = states.as_array();
    let scale = 1.0 / (weights.head_dim() as f64).sqrt();
    weights
        .heads()
        .iter()
        .map(|head| {
            let q = z.dot(&head.query);
            let k = z.dot(&head.key);
            let mut scores = q.dot(&k.t()) * scale;
            for (i, mut row) in scores.axis_iter_mut(Axis(0)).enumerate() {
                let visible = if causal { i + 1 } else { row.len() };
                let max = row
                    .iter()
                    .take(visible)
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                if !max.is_finite() {
                    return Err(AttentionError::NonFinite("attention logits"));
                }
                let mut total = 0.0;
                for (j, v) in row.iter_mut().enumerate() {
                    if j < visible {
                        *v = (*v - max).exp();
                        total += *v;
                    } else {
                        *v = 0.0;
                    }
                }
                row.mapv_inplace(|v| v / total);
            }
            Ok(scores)
        })
        .collect()
}

/// Mean of each of the first `upto` columns, divided by the row count.
pub fn mean_col(matrix: &Array2<f64>, upto: usize) -> Result<Vec<f64>, AttentionError> {
    let cols = matrix.ncols();
    if upto > cols {
        return Err(AttentionError::ColumnBound { upto, cols });
    }
    let rows = matrix.nrows() as f64;
    Ok(matrix
        .slice(ndarray::s![.., ..upto])
        .sum_axis(Axis(0))
        .iter()
        .map(|s| s / rows)
        .collect())
}

/// Elementwise mean over heads.
pub fn mean_heads(per_head: &[Vec<f64>]) -> Result<Vec<f64>, AttentionError> {
    let first = per_head.first().ok_or(AttentionError::NoHeads)?;
    let mut acc = vec![0.0; first.len()];
    for (h, head) in per_head.iter().enumerate() {
        if head.len() != acc.len() {
            return Err(AttentionError::HeadLength {
                head: h,
                expected: acc.len(),
                found: head.len(),
            });
        }
        for (a, v) in acc.iter_mut().zip(head) {
            *a += v;
        }
    }
    let count = per_head.len() as f64;
    Ok(acc.into_iter().map(|a| a / count).collect())
}

/// Full-width attention vector of `states`: column means averaged over heads.
pub fn attn_vec(
    states: &HiddenStates,
    weights: &ProjectionWeights,
    causal: bool,
) -> Result<Vec<f64>, AttentionError> {
    let per_head = attn_matrix(states, weights, causal)?
        .iter()
        .map(|m| mean_col(m, m.ncols()))
        .collect::<Result<Vec<_>, _>>()?;
    mean_heads(&per_head)
}
