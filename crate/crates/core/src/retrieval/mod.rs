//! Query pipeline: keywords are signed, widened to Hamming balls over the
//! signature dictionary, located with select on the signature matrix,
//! validated per entry span with rank, and reconstructed from the content
//! matrix.

mod extractor;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

pub use extractor::{
    is_stopword, parse_keyword_list, ChatCompletionConfig, ChatCompletionExtractor,
    KeywordExtractor, StopwordExtractor, DEFAULT_MAX_KEYWORDS, ENV_API_KEY, ENV_MODEL, ENV_URL,
};

use crate::error::{Error, Result};
use crate::signatures::Signature;
use crate::store::{EntryMetadata, MemoryStore};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueryParams {
    /// Hamming radius of each keyword's ball.
    pub radius: u32,
    pub top_k: usize,
    /// Fraction of keywords an entry must contain, in `(0, 1]`.
    pub tau: f64,
}

impl Default for QueryParams {
    fn default() -> Self {
        Self {
            radius: 2,
            top_k: 5,
            tau: 0.5,
        }
    }
}

impl QueryParams {
    pub fn validate(&self, bits: usize) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid(format!("tau must be in (0, 1], got {}", self.tau)));
        }
        if self.radius as usize > bits {
            return Err(Error::invalid(format!(
                "radius {} exceeds the {bits}-bit signature length",
                self.radius
            )));
        }
        Ok(())
    }

    /// Keywords an entry must contain out of `m`.
    pub fn required_matches(&self, m: usize) -> usize {
        ((self.tau * m as f64) - 1e-9).ceil().max(1.0) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BallCandidate {
    /// Stored signature in its integer form.
    pub signature: u128,
    pub count: u64,
}

/// Every distinct stored signature within `radius` of `q`, by XOR and
/// popcount over the signature dictionary.
pub fn ball_candidates(store: &MemoryStore, q: &Signature, radius: u32) -> Result<Vec<BallCandidate>> {
    let bits = store.config().model.bits;
    if q.len() != bits {
        return Err(Error::invalid(format!(
            "query signature has {} bits, store uses {bits}",
            q.len()
        )));
    }
    if radius as usize > bits {
        return Err(Error::invalid(format!("radius {radius} exceeds {bits} bits")));
    }
    let q = q.to_symbol().expect("store signatures fit 128 bits");
    Ok(store
        .dictionary()
        .iter()
        .filter(|&(s, _)| (s ^ q).count_ones() <= radius)
        .map(|(signature, count)| BallCandidate { signature, count })
        .collect())
}

#[derive(Clone, Debug)]
pub struct QueryPlan {
    pub query: String,
    pub keywords: Vec<String>,
    pub signatures: Vec<Signature>,
    /// Ball members of each keyword.
    pub candidates: Vec<Vec<BallCandidate>>,
    pub params: QueryParams,
    build_time: Duration,
}

impl QueryPlan {
    /// Signs each keyword and collects its ball. Keywords the store's
    /// tokenizer reduces to nothing are dropped.
    pub fn new(
        store: &MemoryStore,
        query: &str,
        keywords: Vec<String>,
        params: QueryParams,
    ) -> Result<Self> {
        let start = Instant::now();
        params.validate(store.config().model.bits)?;
        let mut kept = Vec::new();
        let mut signatures = Vec::new();
        let mut candidates = Vec::new();
        for kw in keywords {
            if store.tokenizer().tokenize(&kw).is_empty() {
                continue;
            }
            let sig = store.keyword_signature(&kw)?;
            candidates.push(ball_candidates(store, &sig, params.radius)?);
            signatures.push(sig);
            kept.push(kw);
        }
        if kept.is_empty() {
            return Err(Error::NoKeywords);
        }
        Ok(Self {
            query: query.to_owned(),
            keywords: kept,
            signatures,
            candidates,
            params,
            build_time: start.elapsed(),
        })
    }

    /// Total stored occurrences across a keyword's ball.
    pub fn frequency(&self, keyword: usize) -> u64 {
        self.candidates[keyword].iter().map(|c| c.count).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RetrievedEntry {
    pub entry: EntryMetadata,
    pub text: String,
    /// Keywords whose ball occurs inside the entry span.
    pub matched: usize,
    pub tokens: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Timing {
    pub extraction: Duration,
    pub search: Duration,
    pub reconstruction: Duration,
    pub total: Duration,
}

#[derive(Clone, Debug, Default)]
pub struct RetrievedResult {
    pub keywords: Vec<String>,
    /// Ordered by matched keywords (desc), timestamp (desc), entry id (asc).
    pub entries: Vec<RetrievedEntry>,
    /// Tokens reconstructed and handed back: the sum of entry span lengths.
    pub tokens_consumed: usize,
    pub timing: Timing,
}

impl RetrievedResult {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Entries matching the plan, ranked and reconstructed.
///
/// An entry that holds at least `need` of the `m` keywords must hold one of
/// any `m - need + 1` of them, so the occurrences of that many least
/// frequent keywords are enumerated with select; every other keyword is
/// then checked per entry span by rank differences. With `tau = 1` this is
/// a single driver, the rarest keyword.
pub fn search(store: &MemoryStore, plan: &QueryPlan) -> Result<RetrievedResult> {
    let start = Instant::now();
    let m = plan.keywords.len();
    let need = plan.params.required_matches(m);
    let sigs = store.signatures();
    let n = store.len();

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&k| (plan.frequency(k), k));
    let drivers = &order[..m - need + 1];

    // entry index -> keywords known present
    let mut found: HashMap<usize, Vec<bool>> = HashMap::new();
    for &k in drivers {
        for cand in &plan.candidates[k] {
            let mut j = 1;
            while let Some(i) = sigs.select(cand.signature, j) {
                let entry = store.covering_entry(i)?;
                found.entry(entry.id as usize).or_insert_with(|| vec![false; m])[k] = true;
                // Skip the remaining occurrences inside this entry.
                j = sigs.rank(cand.signature, (entry.beta + 1).min(n))? + 1;
            }
        }
    }

    let mut hits: Vec<(usize, usize)> = Vec::new();
    for (&e, present) in &mut found {
        let entry = &store.entries()[e];
        for (k, hit) in present.iter_mut().enumerate() {
            if *hit || drivers.contains(&k) {
                continue;
            }
            for cand in &plan.candidates[k] {
                if sigs.range_count(cand.signature, entry.alpha, entry.beta + 1)? > 0 {
                    *hit = true;
                    break;
                }
            }
        }
        let matched = present.iter().filter(|&&p| p).count();
        if matched >= need {
            hits.push((e, matched));
        }
    }
    hits.sort_by(|&(a, ma), &(b, mb)| {
        let (ea, eb) = (&store.entries()[a], &store.entries()[b]);
        mb.cmp(&ma)
            .then(eb.timestamp.cmp(&ea.timestamp))
            .then(ea.id.cmp(&eb.id))
    });
    hits.truncate(plan.params.top_k);
    let search_time = plan.build_time + start.elapsed();

    let start = Instant::now();
    let mut entries = Vec::with_capacity(hits.len());
    for (e, matched) in hits {
        let entry = store.entries()[e].clone();
        let text = store.entry_text(&entry)?;
        entries.push(RetrievedEntry {
            tokens: entry.token_count(),
            entry,
            text,
            matched,
        });
    }
    let reconstruction = start.elapsed();

    Ok(RetrievedResult {
        keywords: plan.keywords.clone(),
        tokens_consumed: entries.iter().map(|e| e.tokens).sum(),
        entries,
        timing: Timing {
            extraction: Duration::ZERO,
            search: search_time,
            reconstruction,
            total: search_time + reconstruction,
        },
    })
}

/// Full pipeline from query text to ranked, reconstructed entries.
pub fn query(
    store: &MemoryStore,
    extractor: &dyn KeywordExtractor,
    text: &str,
    params: QueryParams,
) -> Result<RetrievedResult> {
    let start = Instant::now();
    if text.trim().is_empty() {
        return Err(Error::invalid("empty query"));
    }
    let keywords = extractor.extract(text)?;
    let extraction = start.elapsed();
    if keywords.is_empty() {
        return Err(Error::NoKeywords);
    }
    let plan = QueryPlan::new(store, text, keywords, params)?;
    let mut result = search(store, &plan)?;
    result.timing.extraction = extraction;
    result.timing.total = start.elapsed();
    Ok(result)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnswerContext {
    pub text: String,
    pub tokens: usize,
    pub entries: usize,
}

/// Concatenates entries in rank order under role/timestamp headers, stopping
/// before the first entry that would push the token count past `budget`.
pub fn answer_context(result: &RetrievedResult, budget: usize) -> AnswerContext {
    let mut ctx = AnswerContext::default();
    for r in &result.entries {
        if ctx.tokens + r.tokens > budget {
            break;
        }
        let _ = writeln!(
            ctx.text,
            "[{} | {} | {}]\n{}",
            r.entry.role,
            format_timestamp(r.entry.timestamp),
            r.entry.session,
            r.text
        );
        ctx.tokens += r.tokens;
        ctx.entries += 1;
    }
    ctx
}

/// RFC 3339 rendering of a microsecond timestamp.
pub fn format_timestamp(micros: i64) -> String {
    chrono::DateTime::from_timestamp_micros(micros)
        .map(|t| t.to_rfc3339_opts(chrono::SecondsFormat::Micros, true))
        .unwrap_or_else(|| format!("{micros}us"))
}
