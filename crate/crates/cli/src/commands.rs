use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use hippo_core::metrics::{BenchRecord, BenchReport};
use hippo_core::retrieval::{
    self, answer_context, format_timestamp, ChatCompletionConfig, ChatCompletionExtractor,
    KeywordExtractor, QueryParams, RetrievedResult, StopwordExtractor, ENV_URL,
};
use hippo_core::{persist, verify, Error, MemoryStore, StoreConfig};

use crate::transcript;
use crate::{ExtractorArg, ModelArgs, SearchArgs};

fn open(path: &Path) -> Result<MemoryStore> {
    persist::load(path).with_context(|| format!("cannot load store {}", path.display()))
}

fn config_from(args: &ModelArgs) -> StoreConfig {
    let mut cfg = StoreConfig::default();
    let m = &mut cfg.model;
    if let Some(v) = args.sigma {
        cfg.sigma = v;
    }
    if let Some(v) = args.dims {
        m.dims = v;
    }
    if let Some(v) = args.bits {
        m.bits = v;
    }
    if let Some(v) = args.nnz {
        m.nnz = v;
    }
    if let Some(v) = args.window {
        m.window = v;
    }
    if let Some(v) = args.seed {
        m.seed = v;
    }
    if let Some(v) = args.mode {
        m.mode = v.into();
    }
    cfg
}

/// Model flags given for an existing store must match what it was built with.
fn check_flags(store: &MemoryStore, args: &ModelArgs) -> Result<()> {
    let cfg = store.config();
    let m = &cfg.model;
    let mismatch = |flag: &str, stored: String| {
        anyhow::anyhow!("store was created with --{flag} {stored}; model flags cannot change")
    };
    if args.sigma.is_some_and(|v| v != cfg.sigma) {
        return Err(mismatch("sigma", cfg.sigma.to_string()));
    }
    if args.dims.is_some_and(|v| v != m.dims) {
        return Err(mismatch("dims", m.dims.to_string()));
    }
    if args.bits.is_some_and(|v| v != m.bits) {
        return Err(mismatch("bits", m.bits.to_string()));
    }
    if args.nnz.is_some_and(|v| v != m.nnz) {
        return Err(mismatch("nnz", m.nnz.to_string()));
    }
    if args.window.is_some_and(|v| v != m.window) {
        return Err(mismatch("window", m.window.to_string()));
    }
    if args.seed.is_some_and(|v| v != m.seed) {
        return Err(mismatch("seed", m.seed.to_string()));
    }
    if args.mode.is_some_and(|v| m.mode != v.into()) {
        return Err(mismatch("mode", m.mode.to_string()));
    }
    Ok(())
}

pub fn ingest(store_path: &Path, transcript_path: &Path, model: &ModelArgs) -> Result<ExitCode> {
    let start = Instant::now();
    let mut store = if store_path.exists() {
        let s = open(store_path)?;
        check_flags(&s, model)?;
        s
    } else {
        MemoryStore::new(config_from(model))?
    };
    let source = fs::read_to_string(transcript_path)
        .with_context(|| format!("cannot read {}", transcript_path.display()))?;
    let turns = transcript::parse(&source, store.tokenizer())
        .with_context(|| format!("in {}", transcript_path.display()))?;

    let tokens_before = store.len();
    for (k, turn) in turns.iter().enumerate() {
        if let Err(e) = store.ingest_entry(&turn.speaker, turn.timestamp, &turn.session, &turn.text) {
            let note = match e {
                Error::Capacity { .. } => "vocabulary overflow",
                _ => "ingest failed",
            };
            bail!("{note} at turn {k}: {e}; {k} entries ingested before it, store not saved");
        }
    }
    persist::save(&store, store_path)
        .with_context(|| format!("cannot save {}", store_path.display()))?;
    println!(
        "{} entries, {} tokens in {:.3} s",
        turns.len(),
        store.len() - tokens_before,
        start.elapsed().as_secs_f64()
    );
    Ok(ExitCode::SUCCESS)
}

fn extractor(arg: ExtractorArg) -> Result<Box<dyn KeywordExtractor>> {
    Ok(match arg {
        ExtractorArg::Default => Box::new(StopwordExtractor::default()),
        ExtractorArg::External => {
            let Some(cfg) = ChatCompletionConfig::from_env() else {
                bail!("--extractor external needs {ENV_URL}");
            };
            Box::new(ChatCompletionExtractor::new(cfg))
        }
    })
}

fn params(args: &SearchArgs) -> QueryParams {
    QueryParams {
        radius: args.radius,
        top_k: args.topk,
        tau: args.tau,
    }
}

fn print_result(r: &RetrievedResult, m: usize) {
    println!("keywords: {}", r.keywords.join(", "));
    for (rank, e) in r.entries.iter().enumerate() {
        println!(
            "#{} entry {} | {} | {} | session {} | {}/{} keywords | {} tokens",
            rank + 1,
            e.entry.id,
            e.entry.role,
            format_timestamp(e.entry.timestamp),
            e.entry.session,
            e.matched,
            m,
            e.tokens
        );
        println!("    {}", e.text);
    }
    let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
    println!(
        "timing: extraction {:.3} ms, search {:.3} ms, reconstruction {:.3} ms, total {:.3} ms",
        ms(r.timing.extraction),
        ms(r.timing.search),
        ms(r.timing.reconstruction),
        ms(r.timing.total)
    );
    println!("tokens consumed: {}", r.tokens_consumed);
}

pub fn query(store_path: &Path, text: &str, args: &SearchArgs, budget: Option<usize>) -> Result<ExitCode> {
    let store = open(store_path)?;
    let ex = extractor(args.extractor)?;
    let result = retrieval::query(&store, ex.as_ref(), text, params(args))?;
    print_result(&result, result.keywords.len());
    if let Some(budget) = budget {
        let ctx = answer_context(&result, budget);
        println!("context: {} entries, {} tokens", ctx.entries, ctx.tokens);
        print!("{}", ctx.text);
    }
    Ok(if result.is_empty() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

pub fn stats(store_path: &Path) -> Result<ExitCode> {
    let store = open(store_path)?;
    let (_, layout) = persist::encode(&store);
    println!("{}", store.stats());
    let payload = (store.content().payload_bits() + store.signatures().payload_bits()).div_ceil(8);
    println!("image bytes          {}", layout.total());
    println!("level section bytes  {} (payload {payload})", layout.levels());
    Ok(ExitCode::SUCCESS)
}

pub fn verify(store_path: &Path, samples: usize, seed: u64) -> Result<ExitCode> {
    let store = open(store_path)?;
    let report = verify::verify_store(&store, samples, seed)?;
    print!("{report}");
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

pub fn bench(
    store_path: &Path,
    queries_path: &Path,
    args: &SearchArgs,
    report_path: Option<&Path>,
    threads: usize,
) -> Result<ExitCode> {
    let store = open(store_path)?;
    let source = fs::read_to_string(queries_path)
        .with_context(|| format!("cannot read {}", queries_path.display()))?;
    let queries: Vec<&str> = source.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let ex = extractor(args.extractor)?;
    let p = params(args);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let records: Vec<BenchRecord> = pool.install(|| {
        queries
            .par_iter()
            .enumerate()
            .map(|(i, q)| match retrieval::query(&store, ex.as_ref(), q, p) {
                Ok(r) => Ok(BenchRecord::from_result(i, q, &r)),
                Err(Error::NoKeywords) => {
                    log::warn!("query {i} has no keywords");
                    Ok(BenchRecord::from_result(i, q, &RetrievedResult::default()))
                }
                Err(e) => Err(anyhow::Error::new(e).context(format!("query {i}: {q:?}"))),
            })
            .collect::<Result<_>>()
    })?;
    let report = BenchReport::new(records);
    println!("{report}");
    if let Some(path) = report_path {
        fs::write(path, report.to_tsv()).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}
