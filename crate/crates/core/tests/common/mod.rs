//! Corpus generators and brute-force oracles shared by the integration
//! targets. The oracles recompute everything from the ingest log through
//! the public model API and never consult the wavelet matrices.
#![allow(dead_code)]

use std::collections::BTreeSet;

use hippo_core::signatures::ContextEmbedding;
use hippo_core::store::{CanonicalTokenizer, Tokenizer};
use hippo_core::{EntryMetadata, MemoryStore, RandomIndexModel, StoreConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One ingested entry as the caller supplied it.
#[derive(Clone, Debug)]
pub struct LogEntry {
    pub role: String,
    pub timestamp: i64,
    pub session: String,
    pub text: String,
}

/// Lowercase; alphanumeric runs are tokens; any other non-space character
/// is a token of its own.
pub fn canonical_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            out.extend(std::iter::once(ch.to_lowercase().collect::<String>()));
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

pub fn canonical(text: &str) -> String {
    canonical_tokens(text).join(" ")
}

/// Word list with roughly Zipfian use.
pub struct Lexicon {
    words: Vec<String>,
    cumulative: Vec<f64>,
}

impl Lexicon {
    pub fn new(size: usize) -> Self {
        const SYLLABLES: [&str; 16] = [
            "ka", "lo", "mi", "ren", "tu", "sa", "vel", "qo", "zin", "pa", "dor", "ei", "fu", "gra",
            "hum", "ny",
        ];
        let words = (0..size)
            .map(|k| {
                let mut w = String::new();
                let mut x = k + 1;
                while x > 0 {
                    w.push_str(SYLLABLES[x % 16]);
                    x /= 16;
                }
                w
            })
            .collect();
        let mut acc = 0.0;
        let cumulative = (0..size)
            .map(|k| {
                acc += 1.0 / (k as f64 + 1.0);
                acc
            })
            .collect();
        Self { words, cumulative }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> &str {
        let x = rng.random::<f64>() * self.cumulative.last().unwrap();
        let k = self.cumulative.partition_point(|&c| c < x).min(self.words.len() - 1);
        &self.words[k]
    }

    pub fn word(&self, k: usize) -> &str {
        &self.words[k]
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }
}

/// Dialogue-like text: capitalised sentences, commas, end punctuation.
pub fn sentence(lex: &Lexicon, rng: &mut impl Rng, words: usize) -> String {
    let mut s = String::new();
    for k in 0..words {
        let w = lex.sample(rng);
        if k == 0 {
            let mut c = w.chars();
            let first = c.next().unwrap().to_uppercase().collect::<String>();
            s.push_str(&first);
            s.push_str(c.as_str());
        } else {
            s.push(' ');
            s.push_str(w);
        }
        if k + 1 < words && rng.random_bool(0.08) {
            s.push(',');
        }
    }
    s.push(['.', '?', '!'][rng.random_range(0..3)]);
    s
}

/// Synthetic multi-session transcript of at least `tokens` tokens.
pub fn transcript(tokens: usize, seed: u64) -> Vec<LogEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lex = Lexicon::new(4000);
    let mut out = Vec::new();
    let mut total = 0;
    let mut ts = 1_700_000_000_000_000i64;
    while total < tokens {
        let words = rng.random_range(3..25);
        let text = sentence(&lex, &mut rng, words);
        total += canonical_tokens(&text).len();
        ts += rng.random_range(1..60_000_000);
        out.push(LogEntry {
            role: if out.len() % 2 == 0 { "user" } else { "assistant" }.into(),
            timestamp: ts,
            session: format!("session-{}", out.len() / 40),
            text,
        });
    }
    out
}

pub fn build(config: StoreConfig, log: &[LogEntry]) -> MemoryStore {
    let mut store = MemoryStore::new(config).unwrap();
    for e in log {
        store.ingest_entry(&e.role, e.timestamp, &e.session, &e.text).unwrap();
    }
    store
}

/// Stored signature of every token of every entry, recomputed by direct
/// window sums.
pub fn position_signatures(model: &RandomIndexModel, log: &[LogEntry]) -> Vec<Vec<u128>> {
    log.iter()
        .map(|e| {
            let toks = CanonicalTokenizer.tokenize(&e.text);
            (0..toks.len())
                .map(|i| {
                    let emb = model.context_embedding(&toks, i, 0..toks.len()).unwrap();
                    model.signature_of(&emb).unwrap().to_symbol().unwrap()
                })
                .collect()
        })
        .collect()
}

pub fn keyword_signature(model: &RandomIndexModel, keyword: &str) -> u128 {
    let mut e = ContextEmbedding::zeros(model.params().dims);
    for tok in canonical_tokens(keyword) {
        e.add(&model.base_vector(&tok));
    }
    model.signature_of(&e).unwrap().to_symbol().unwrap()
}

/// Entry ids an exhaustive scan retrieves, in ranking order: entries holding
/// at least `need` keywords within `radius`, by matched count, recency, id.
pub fn oracle_search(
    model: &RandomIndexModel,
    log: &[LogEntry],
    sigs: &[Vec<u128>],
    keywords: &[&str],
    radius: u32,
    need: usize,
) -> Vec<(u64, usize)> {
    let qs: Vec<u128> = keywords.iter().map(|k| keyword_signature(model, k)).collect();
    let mut hits: Vec<(u64, usize)> = sigs
        .iter()
        .enumerate()
        .filter_map(|(e, pos)| {
            let matched = qs
                .iter()
                .filter(|&&q| pos.iter().any(|&s| (s ^ q).count_ones() <= radius))
                .count();
            (matched >= need).then_some((e as u64, matched))
        })
        .collect();
    hits.sort_by(|&(a, ma), &(b, mb)| {
        mb.cmp(&ma)
            .then(log[b as usize].timestamp.cmp(&log[a as usize].timestamp))
            .then(a.cmp(&b))
    });
    hits
}

pub fn ids(entries: &[EntryMetadata]) -> BTreeSet<u64> {
    entries.iter().map(|e| e.id).collect()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Gaussian pair at exactly `theta` (up to integer rounding), scaled so
/// rounding to integers is negligible.
pub fn pair_at_angle(rng: &mut impl Rng, dims: usize, theta: f64) -> (ContextEmbedding, ContextEmbedding) {
    use rand_distr::{Distribution, StandardNormal};
    let g = |rng: &mut _| -> Vec<f64> { (0..dims).map(|_| StandardNormal.sample(rng)).collect() };
    let u = g(rng);
    let mut v = g(rng);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let uu = dot(&u, &u);
    let proj = dot(&u, &v) / uu;
    for (vi, ui) in v.iter_mut().zip(&u) {
        *vi -= proj * ui;
    }
    let (nu, nv) = (uu.sqrt(), dot(&v, &v).sqrt());
    let scale = 1e6 / nu.max(nv);
    let a: Vec<i32> = u.iter().map(|x| (x * scale).round() as i32).collect();
    let b: Vec<i32> = u
        .iter()
        .zip(&v)
        .map(|(x, y)| ((theta.cos() * x / nu + theta.sin() * y / nv) * nu * scale).round() as i32)
        .collect();
    (ContextEmbedding::from_components(a), ContextEmbedding::from_components(b))
}

pub fn store_config(window: usize) -> StoreConfig {
    let mut c = StoreConfig::default();
    c.model.window = window;
    c
}

/// 200 entries over a small lexicon, with planted tokens `plant0..plant24`
/// appearing as isolated one-token entries and occasionally inside longer
/// entries. Returns the log and the planted tokens.
pub fn planted_corpus(seed: u64) -> (Vec<LogEntry>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lex = Lexicon::new(300);
    let planted: Vec<String> = (0..25).map(|k| format!("plant{k}")).collect();
    let mut log = Vec::new();
    for k in 0..200 {
        let text = match k % 4 {
            0 => planted[rng.random_range(0..planted.len())].clone(),
            1 if rng.random_bool(0.3) => {
                let words = rng.random_range(3..10);
                let mut s = sentence(&lex, &mut rng, words);
                s.push(' ');
                s.push_str(&planted[rng.random_range(0..planted.len())]);
                s
            }
            _ => {
                let words = rng.random_range(1..15);
                sentence(&lex, &mut rng, words)
            }
        };
        log.push(LogEntry {
            role: if k % 2 == 0 { "user" } else { "assistant" }.into(),
            timestamp: 1_000_000 + (k as i64 * 7919) % 1000,
            session: format!("s{}", k / 50),
            text,
        });
    }
    (log, planted)
}

/// Fifty queries of one to three keywords mixing planted tokens, lexicon
/// words and absent words.
pub fn planted_queries(planted: &[String], seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lex = Lexicon::new(300);
    (0..50)
        .map(|_| {
            let m = rng.random_range(1..=3);
            (0..m)
                .map(|_| match rng.random_range(0..10) {
                    0..=5 => planted[rng.random_range(0..planted.len())].clone(),
                    6..=8 => lex.sample(&mut rng).to_owned(),
                    _ => format!("absent{}", rng.random_range(0..100)),
                })
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        })
        .collect()
}
