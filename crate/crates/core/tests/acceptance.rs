//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod support;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reactive_retrieval::attention::{attn_matrix, attn_vec, mean_col, reaction_vector, ToyConfig, ToyTransformer};
use reactive_retrieval::baselines::{truncate_middle, HashedBagOfWords};
use reactive_retrieval::easy::{easy_align, score_alignment, AlignmentReport, DEFAULT_TOL};
use reactive_retrieval::exec::Execution;
use reactive_retrieval::harness::synthetic::{alignment_corpus, needle_corpus, AlignmentCorpusConfig, NeedleConfig};
use reactive_retrieval::harness::{eval, Method, PipelineConfig};
use reactive_retrieval::retrieval::{greedy_retrieve, RetrievalConfig, ScoredSentence, SentenceSpan};
use reactive_retrieval::tokenization::{ReferenceBpe, TokenSequence, Tokenizer, TokenizerId};

use support::{library_inputs, oracle_attn_vec, oracle_matrix, random_instance, replay_greedy};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for case in 0..200u64 {
        let inst = random_instance(0xA77E_0000 + case, 16, 8, 4);
        let (states, weights) = library_inputs(&inst);
        let matrices = attn_matrix(&states, &weights, inst.causal).unwrap();
        for (m, (wq, wk)) in matrices.iter().zip(&inst.heads) {
            let oracle = oracle_matrix(&inst.z, wq, wk, inst.causal);
            for (i, row) in oracle.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    worst = worst.max((m[[i, j]] - v).abs());
                }
            }
        }
        let got = attn_vec(&states, &weights, inst.causal).unwrap();
        let want = oracle_attn_vec(&inst.z, &inst.heads, inst.causal);
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && elapsed < Duration::from_secs(10),
        format!("200 cases, max |diff| {worst:.2e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn seq(ids: Vec<u32>) -> TokenSequence {
    TokenSequence {
        tokenizer: TokenizerId::new("reference-bpe").unwrap(),
        source_len: ids.len(),
        ids,
    }
}

fn empty_query_identity() -> Outcome {
    let toy = ToyTransformer::new(ToyConfig { seed: 11, ..ToyConfig::default() }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut nonzero = 0;
    for _ in 0..50 {
        let n = rng.random_range(1..=200);
        let ctx: Vec<u32> = (0..n).map(|_| rng.random_range(0..400)).collect();
        let rv = reaction_vector(&seq(ctx), &seq(vec![]), &toy, 64, Execution::Parallel).unwrap();
        nonzero += rv.values.iter().filter(|&&v| v != 0.0).count();
    }
    outcome(nonzero == 0, format!("50 contexts, {nonzero} non-zero entries"))
}

fn row_stochasticity() -> Outcome {
    let mut worst_row: f64 = 0.0;
    let mut worst_mass: f64 = 0.0;
    let mut matrices = 0;
    let mut check = |ms: Vec<ndarray::Array2<f64>>| {
        for m in ms {
            matrices += 1;
            for row in m.rows() {
                worst_row = worst_row.max((row.sum() - 1.0).abs());
            }
            let mass: f64 = mean_col(&m, m.ncols()).unwrap().iter().sum();
            worst_mass = worst_mass.max((mass - 1.0).abs());
        }
    };
    for case in 0..200u64 {
        let inst = random_instance(0x5700_0000 + case, 16, 8, 4);
        let (states, weights) = library_inputs(&inst);
        check(attn_matrix(&states, &weights, inst.causal).unwrap());
    }
    let toy = ToyTransformer::new(ToyConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let n = rng.random_range(1..=300);
        let ids: Vec<u32> = (0..n).map(|_| rng.random_range(0..300)).collect();
        let states = toy.hidden_states(&ids).unwrap();
        check(attn_matrix(&states, toy.weights(), true).unwrap());
    }
    outcome(
        worst_row <= 1e-6 && worst_mass <= 1e-6,
        format!("{matrices} matrices, max row error {worst_row:.2e}, max mass error {worst_mass:.2e}"),
    )
}

fn align_corpus(merge_fraction: f64) -> (AlignmentReport, usize, Duration) {
    let start = Instant::now();
    let tok = ReferenceBpe::standard();
    let cfg = AlignmentCorpusConfig { docs: 50, sentences_per_doc: 20, merge_fraction };
    let corpus = alignment_corpus(2024, &cfg);
    let reports: Vec<AlignmentReport> = Execution::Parallel.map(&corpus.records, |r| {
        let targets = r.sentences.as_ref().unwrap();
        let ids = tok.encode(&r.context).unwrap();
        let b = easy_align(&tok, &ids, targets, DEFAULT_TOL).unwrap();
        score_alignment(&tok, &ids, targets, &b).unwrap()
    });
    let pooled = AlignmentReport::from_scores(reports.into_iter().flat_map(|r| r.per_sentence).collect());
    (pooled, corpus.merged, start.elapsed())
}

fn easy_exact_corpus() -> Outcome {
    let (r, _, _) = align_corpus(0.0);
    outcome(
        r.per_sentence.len() == 1000 && r.match_rate == 1.0 && r.mean_levenshtein == 0.0,
        format!(
            "{} sentences, match {:.2}%, mean lev {}",
            r.per_sentence.len(),
            r.match_rate * 100.0,
            r.mean_levenshtein
        ),
    )
}

fn easy_adversarial_corpus() -> Outcome {
    let (r, merged, elapsed) = align_corpus(0.05);
    outcome(
        r.match_rate >= 0.90 && r.mean_levenshtein_nonzero <= 6.0 && elapsed < Duration::from_secs(30),
        format!(
            "{} sentences, {merged} merged junctions, match {:.2}%, non-zero mean lev {:.2}, {:.2}s",
            r.per_sentence.len(),
            r.match_rate * 100.0,
            r.mean_levenshtein_nonzero,
            elapsed.as_secs_f64()
        ),
    )
}

fn random_scored(rng: &mut ChaCha8Rng, max_n: usize) -> (Vec<ScoredSentence>, usize) {
    let n = rng.random_range(0..=max_n);
    let mut start = 0;
    let scored = (0..n)
        .map(|index| {
            let len = rng.random_range(1..=12);
            // Coarse scores so ties are common.
            let score = rng.random_range(0..6) as f64 / 4.0;
            let span = SentenceSpan { index, text: String::new(), start, end: start + len };
            start += len;
            ScoredSentence { span, score }
        })
        .collect();
    (scored, rng.random_range(1..=60))
}

fn selected(scored: &[ScoredSentence], budget: usize) -> (Vec<usize>, usize) {
    let r = greedy_retrieve(scored, &RetrievalConfig::new(budget)).unwrap();
    (r.selected.iter().map(|s| s.index).collect(), r.retrieved_tokens)
}

fn greedy_replay() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    let mut violations = 0;
    for _ in 0..1000 {
        let (scored, budget) = random_scored(&mut rng, 8);
        let scores: Vec<f64> = scored.iter().map(|s| s.score).collect();
        let lens: Vec<usize> = scored.iter().map(|s| s.token_len()).collect();
        let (got, retrieved) = selected(&scored, budget);
        if got != replay_greedy(&scores, &lens, budget, 4, 5) {
            mismatches += 1;
        }
        if retrieved > budget || got.len() > 4 * scored.len() / 5 {
            violations += 1;
        }
    }
    outcome(
        mismatches == 0 && violations == 0,
        format!("1000 instances, {mismatches} replay mismatches, {violations} budget/cap violations"),
    )
}

fn monotone_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut changed = 0;
    for _ in 0..500 {
        let (scored, budget) = random_scored(&mut rng, 12);
        let mapped: Vec<ScoredSentence> = scored
            .iter()
            .cloned()
            .map(|mut s| {
                s.score = 2.0 * s.score + 1.0;
                s
            })
            .collect();
        if selected(&scored, budget).0 != selected(&mapped, budget).0 {
            changed += 1;
        }
    }
    outcome(changed == 0, format!("500 instances, {changed} selections changed"))
}

fn needle_ordering() -> Outcome {
    let tok = ReferenceBpe::standard();
    let toy = ToyTransformer::new(ToyConfig::default()).unwrap();
    let mut cfg = PipelineConfig::new(NEEDLE_BUDGET);
    cfg.window = 512;
    let methods = [Method::Reactive, Method::Truncate];
    let draws = 20;
    let mut strict = 0;
    let mut worse = 0;
    let (mut sum_reactive, mut sum_trunc) = (0.0, 0.0);
    for draw in 0..draws {
        let corpus = needle_corpus(1000 + draw, &NeedleConfig::default());
        let report = eval(&corpus, &tok, &toy, &HashedBagOfWords::default(), &cfg, &methods, draw);
        let reactive = report.methods[0].needle_recall.unwrap_or(0.0);
        let trunc = report.methods[1].needle_recall.unwrap_or(0.0);
        sum_reactive += reactive;
        sum_trunc += trunc;
        if reactive > trunc {
            strict += 1;
        }
        if reactive < trunc {
            worse += 1;
        }
    }
    let needed = (draws as f64 * 0.8).ceil() as u64;
    outcome(
        worse == 0 && strict >= needed,
        format!(
            "{draws} draws, strict improvement on {strict}, worse on {worse}, mean recall reactive {:.2} vs trunc {:.2}",
            sum_reactive / draws as f64,
            sum_trunc / draws as f64
        ),
    )
}

const NEEDLE_BUDGET: usize = 300;

fn truncate_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = 0;
    let cases = 5000;
    for _ in 0..cases {
        let n = rng.random_range(0..=500u32);
        let budget = rng.random_range(0..=600usize);
        let ids: Vec<u32> = (0..n).map(|_| rng.random()).collect();
        let out = truncate_middle(&seq(ids.clone()), budget);
        let n = n as usize;
        let ok = if n <= budget {
            out.ids == ids
        } else {
            let head = budget / 2;
            let tail = budget.div_ceil(2);
            out.len() == budget && out.ids[..head] == ids[..head] && out.ids[head..] == ids[n - tail..]
        };
        if !ok || out.len() != n.min(budget) {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{cases} fuzzed inputs, {failures} contract violations"))
}

fn determinism() -> Outcome {
    let tok = ReferenceBpe::standard();
    let toy = ToyTransformer::new(ToyConfig { seed: 9, ..ToyConfig::default() }).unwrap();
    let corpus = needle_corpus(77, &NeedleConfig { records: 50, filler_sentences: 12, ..NeedleConfig::default() });
    let methods: Vec<Method> = ["reactive", "trunc", "bm25_64_2", "embed_64_2"]
        .iter()
        .map(|m| m.parse().unwrap())
        .collect();
    let run = |exec| {
        let mut cfg = PipelineConfig::new(120);
        cfg.window = 256;
        cfg.exec = exec;
        eval(&corpus, &tok, &toy, &HashedBagOfWords::default(), &cfg, &methods, 77).to_json()
    };
    let a = run(Execution::Parallel);
    let b = run(Execution::Parallel);
    let c = run(Execution::Sequential);
    outcome(
        a == b && a == c,
        format!("50-record corpus, {} bytes, parallel runs identical: {}, sequential identical: {}", a.len(), a == b, a == c),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("empty-query identity", empty_query_identity),
        ("row-stochasticity and mass", row_stochasticity),
        ("alignment exact corpus", easy_exact_corpus),
        ("alignment adversarial corpus", easy_adversarial_corpus),
        ("greedy replay", greedy_replay),
        ("monotone-score invariance", monotone_invariance),
        ("needle recall ordering", needle_ordering),
        ("truncate-middle contract", truncate_contract),
        ("report determinism", determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let o = run();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
