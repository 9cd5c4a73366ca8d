mod args;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::Parser;
use reactive_retrieval::attention::{AttentionProvider, DumpProvider, ToyConfig, ToyTransformer};
use reactive_retrieval::baselines::{ChunkingSpec, HashedBagOfWords};
use reactive_retrieval::exec::Execution;
use reactive_retrieval::harness::synthetic::{alignment_corpus, needle_corpus, AlignmentCorpusConfig, NeedleConfig};
use reactive_retrieval::harness::{
    align_records, eval, load_corpus, prepare_all, run_prepared, write_jsonl, Method, PipelineConfig, RecordOutcome,
    Report,
};
use reactive_retrieval::retrieval::{MeanMode, RetrievalConfig, ScanRule};
use reactive_retrieval::tokenization::{SidecarTokenizer, Tokenizer, TokenizerRegistry};

use args::{BaselineArg, Cli, Command, Global, MeanArg, ScanArg, SyntheticKind};

const PARTIAL_FAILURE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}

/// Error chain joined by `: `, dropping causes the outer message already quotes.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn tokenizer(spec: &str) -> Result<Arc<dyn Tokenizer>> {
    if let Some(path) = spec.strip_prefix("sidecar:") {
        let t = SidecarTokenizer::load(Path::new(path)).with_context(|| format!("loading sidecar {path}"))?;
        return Ok(Arc::new(t));
    }
    Ok(TokenizerRegistry::with_defaults().get(spec)?)
}

fn provider(g: &Global, tokenizer: &dyn Tokenizer) -> Result<Box<dyn AttentionProvider>> {
    if g.provider == "toy" {
        return Ok(Box::new(ToyTransformer::new(ToyConfig { seed: g.seed, ..ToyConfig::default() })?));
    }
    let Some(path) = g.provider.strip_prefix("dump:") else {
        bail!("unknown provider `{}` (expected `toy` or `dump:<path>`)", g.provider);
    };
    let dump = DumpProvider::load(Path::new(path)).with_context(|| format!("loading dump {path}"))?;
    if dump.header().tokenizer != *tokenizer.id() {
        bail!(
            "dump was written with tokenizer `{}` but `{}` is selected",
            dump.header().tokenizer,
            tokenizer.id()
        );
    }
    Ok(Box::new(dump))
}

fn pipeline_config(g: &Global, task_prompt: &str) -> Result<PipelineConfig> {
    let retrieval = RetrievalConfig {
        budget: g.budget,
        cap_fraction: g.cap_fraction,
        mean_mode: match g.mean_mode {
            MeanArg::Arithmetic => MeanMode::Arithmetic,
            MeanArg::Geometric => MeanMode::Geometric,
        },
        scan: match g.scan {
            ScanArg::Skip => ScanRule::SkipAndContinue,
            ScanArg::Stop => ScanRule::StopAtFirstMiss,
        },
    };
    retrieval.validate()?;
    if g.tol == 0 {
        bail!("--tol must be at least 1");
    }
    Ok(PipelineConfig {
        retrieval,
        tol: g.tol,
        window: g.window,
        task_prompt: task_prompt.to_string(),
        exec: if g.sequential { Execution::Sequential } else { Execution::default() },
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn status<T>(outcomes: &[RecordOutcome<T>]) -> ExitCode {
    let failed = outcomes.iter().filter(|o| !o.is_ok()).count();
    if failed > 0 {
        eprintln!("{failed} of {} records failed", outcomes.len());
        ExitCode::from(PARTIAL_FAILURE)
    } else {
        ExitCode::SUCCESS
    }
}

fn run_method(g: &Global, io: &args::Io, method: Method, task_prompt: &str) -> Result<ExitCode> {
    let cfg = pipeline_config(g, task_prompt)?;
    let tok = tokenizer(&g.tokenizer)?;
    let records = load_corpus(&io.corpus)?;
    // Baselines never consult the attention provider.
    let provider: Box<dyn AttentionProvider> = match method {
        Method::Reactive => provider(g, tok.as_ref())?,
        _ => Box::new(ToyTransformer::new(ToyConfig::default())?),
    };
    let prepared = prepare_all(&records, tok.as_ref(), cfg.tol, cfg.exec);
    let out = run_prepared(&prepared, method, tok.as_ref(), provider.as_ref(), &HashedBagOfWords::default(), &cfg);
    emit(io.out.as_deref(), &write_jsonl(&out))?;
    Ok(status(&out))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    match &cli.command {
        Command::Align(io) => {
            let tok = tokenizer(&g.tokenizer)?;
            if g.tol == 0 {
                bail!("--tol must be at least 1");
            }
            let records = load_corpus(&io.corpus)?;
            let exec = if g.sequential { Execution::Sequential } else { Execution::default() };
            let out = align_records(&records, tok.as_ref(), g.tol, exec);
            emit(io.out.as_deref(), &write_jsonl(&out))?;
            Ok(status(&out))
        }
        Command::Retrieve { io, task_prompt } => run_method(g, io, Method::Reactive, task_prompt),
        Command::Baseline { io, method, chunk, topk, task_prompt } => {
            let method = match method {
                BaselineArg::Trunc => Method::Truncate,
                BaselineArg::Bm25 => Method::Bm25(ChunkingSpec::new(*chunk, *topk)?),
                BaselineArg::Embed => Method::Embed(ChunkingSpec::new(*chunk, *topk)?),
            };
            run_method(g, io, method, task_prompt)
        }
        Command::GenSynthetic { kind, records, sentences, merge_fraction, out } => {
            let corpus = match kind {
                SyntheticKind::Needle => needle_corpus(
                    g.seed,
                    &NeedleConfig { records: *records, filler_sentences: *sentences, ..NeedleConfig::default() },
                ),
                SyntheticKind::Align => {
                    if !(0.0..=1.0).contains(merge_fraction) {
                        bail!("--merge-fraction must be within [0, 1]");
                    }
                    let cfg = AlignmentCorpusConfig {
                        docs: *records,
                        sentences_per_doc: *sentences,
                        merge_fraction: *merge_fraction,
                    };
                    alignment_corpus(g.seed, &cfg).records
                }
            };
            emit(out.as_deref(), &write_jsonl(&corpus))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { io, methods, table } => {
            let methods = methods
                .iter()
                .map(|m| m.trim().parse::<Method>())
                .collect::<Result<Vec<_>, _>>()?;
            if methods.is_empty() {
                bail!("no methods given");
            }
            let cfg = pipeline_config(g, "")?;
            let tok = tokenizer(&g.tokenizer)?;
            let provider = provider(g, tok.as_ref())?;
            let records = load_corpus(&io.corpus)?;
            if records.is_empty() {
                bail!("corpus {} has no records", io.corpus.display());
            }
            let report = eval(&records, tok.as_ref(), provider.as_ref(), &HashedBagOfWords::default(), &cfg, &methods, g.seed);
            emit(io.out.as_deref(), &report.to_json())?;
            if *table {
                eprint!("{}", report.to_table());
            }
            let failures = report.failures();
            if failures > 0 {
                eprintln!("{failures} record failures");
                return Ok(ExitCode::from(PARTIAL_FAILURE));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { input } => {
            let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
            let report: Report = serde_json::from_str(&text).with_context(|| format!("parsing {}", input.display()))?;
            emit(None, &report.to_table())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
