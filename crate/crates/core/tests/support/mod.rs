//! Reference implementations used as oracles. Deliberately naive: plain
//! loops over `Vec`s, no shared code with the library kernels.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reactive_retrieval::attention::{HeadProjection, HiddenStates, ProjectionWeights};
use reactive_retrieval::tokenization::{TokenSequence, Tokenizer};

pub type Matrix = Vec<Vec<f64>>;

/// One random attention instance.
pub struct Instance {
    pub z: Matrix,
    /// Per head: (W_Q, W_K), each d × d_head.
    pub heads: Vec<(Matrix, Matrix)>,
    pub causal: bool,
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(-scale..scale)).collect())
        .collect()
}

pub fn random_instance(seed: u64, max_n: usize, max_d: usize, max_h: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_n);
    let d = rng.random_range(1..=max_d);
    let dh = rng.random_range(1..=d);
    let h = rng.random_range(1..=max_h);
    Instance {
        z: random_matrix(&mut rng, n, d, 2.0),
        heads: (0..h)
            .map(|_| (random_matrix(&mut rng, d, dh, 1.5), random_matrix(&mut rng, d, dh, 1.5)))
            .collect(),
        causal: rng.random_bool(0.5),
    }
}

pub fn to_array(m: &Matrix) -> ndarray::Array2<f64> {
    let rows = m.len();
    let cols = m[0].len();
    ndarray::Array2::from_shape_fn((rows, cols), |(i, j)| m[i][j])
}

pub fn library_inputs(inst: &Instance) -> (HiddenStates, ProjectionWeights) {
    let states = HiddenStates::new(to_array(&inst.z)).unwrap();
    let weights = ProjectionWeights::new(
        inst.heads
            .iter()
            .map(|(q, k)| HeadProjection { query: to_array(q), key: to_array(k) })
            .collect(),
    )
    .unwrap();
    (states, weights)
}

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = vec![vec![0.0; b[0].len()]; a.len()];
    for i in 0..a.len() {
        for j in 0..b[0].len() {
            let mut s = 0.0;
            for k in 0..b.len() {
                s += a[i][k] * b[k][j];
            }
            out[i][j] = s;
        }
    }
    out
}

/// Softmax of `QKᵀ/√d_head` for one head, computed entry by entry.
#[allow(clippy::needless_range_loop)]
pub fn oracle_matrix(z: &Matrix, wq: &Matrix, wk: &Matrix, causal: bool) -> Matrix {
    let q = matmul(z, wq);
    let k = matmul(z, wk);
    let n = z.len();
    let dh = wq[0].len();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        let limit = if causal { i + 1 } else { n };
        let mut logits = Vec::with_capacity(limit);
        for j in 0..limit {
            let mut dot = 0.0;
            for t in 0..dh {
                dot += q[i][t] * k[j][t];
            }
            logits.push(dot / (dh as f64).sqrt());
        }
        let mut max = f64::NEG_INFINITY;
        for &l in &logits {
            if l > max {
                max = l;
            }
        }
        let mut denom = 0.0;
        for &l in &logits {
            denom += (l - max).exp();
        }
        for j in 0..limit {
            a[i][j] = (logits[j] - max).exp() / denom;
        }
    }
    a
}

/// Column sums over all rows divided by the row count, first `upto` columns.
pub fn oracle_mean_col(a: &Matrix, upto: usize) -> Vec<f64> {
    let mut out = vec![0.0; upto];
    for row in a {
        for j in 0..upto {
            out[j] += row[j];
        }
    }
    for v in &mut out {
        *v /= a.len() as f64;
    }
    out
}

pub fn oracle_mean_heads(per_head: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; per_head[0].len()];
    for head in per_head {
        for (o, v) in out.iter_mut().zip(head) {
            *o += v;
        }
    }
    out.iter().map(|v| v / per_head.len() as f64).collect()
}

pub fn oracle_attn_vec(z: &Matrix, heads: &[(Matrix, Matrix)], causal: bool) -> Vec<f64> {
    let per_head: Vec<Vec<f64>> = heads
        .iter()
        .map(|(q, k)| oracle_mean_col(&oracle_matrix(z, q, k, causal), z.len()))
        .collect();
    oracle_mean_heads(&per_head)
}

/// Greedy scan written as repeated arg-max over the unvisited sentences.
/// Cap is `floor(num * n / den)` in integer arithmetic.
pub fn replay_greedy(scores: &[f64], lens: &[usize], budget: usize, cap_num: usize, cap_den: usize) -> Vec<usize> {
    let n = scores.len();
    let cap = cap_num * n / cap_den;
    let mut visited = vec![false; n];
    let mut chosen = Vec::new();
    let mut spent = 0;
    for _ in 0..n {
        if chosen.len() == cap || spent == budget {
            break;
        }
        let mut best: Option<usize> = None;
        for i in 0..n {
            if visited[i] {
                continue;
            }
            best = match best {
                Some(b) if scores[b] >= scores[i] => Some(b),
                _ => Some(i),
            };
        }
        let i = best.unwrap();
        visited[i] = true;
        if lens[i] > 0 && spent + lens[i] <= budget {
            spent += lens[i];
            chosen.push(i);
        }
    }
    chosen.sort();
    chosen
}

/// Smallest total Levenshtein distance over every monotone boundary
/// placement, found by enumerating all placements.
pub fn exhaustive_alignment(tokenizer: &dyn Tokenizer, seq: &TokenSequence, targets: &[String]) -> usize {
    let n = seq.len();
    let norm = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    // dist[i][l][r]: distance of sentence i placed on [l, r).
    let dist: Vec<Vec<Vec<usize>>> = targets
        .iter()
        .map(|t| {
            let want = norm(t);
            (0..=n)
                .map(|l| {
                    (0..=n)
                        .map(|r| {
                            if r < l {
                                usize::MAX
                            } else {
                                strsim::levenshtein(&norm(&tokenizer.decode(seq, l, r).unwrap()), &want)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    fn search(dist: &[Vec<Vec<usize>>], i: usize, l: usize, n: usize, acc: usize, best: &mut usize) {
        if acc >= *best {
            return;
        }
        if i == dist.len() {
            *best = acc;
            return;
        }
        for r in l..=n {
            search(dist, i + 1, r, n, acc + dist[i][l][r], best);
        }
    }
    let mut best = usize::MAX;
    search(&dist, 0, 0, n, 0, &mut best);
    best
}
