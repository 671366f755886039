//! Memory construction: entries are tokenized, their token ids appended to
//! the content matrix and their windowed signatures to the signature matrix
//! at the same positions, with a metadata row recording the span.

mod tokenizer;
mod vocabulary;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock, RwLockReadGuard};

pub use tokenizer::{CanonicalTokenizer, Tokenizer};
pub use vocabulary::Vocabulary;

use crate::dwm::DynamicWaveletMatrix;
use crate::error::{Error, Result};
use crate::signatures::{ModelParams, RandomIndexModel, Signature, SparseTernary};

pub const DEFAULT_SIGMA: usize = 1 << 16;
/// Widest signature the signature matrix can hold.
pub const MAX_SIGNATURE_BITS: usize = 128;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoreConfig {
    /// Vocabulary capacity; fixes the content matrix width.
    pub sigma: usize,
    pub model: ModelParams,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SIGMA,
            model: ModelParams::default(),
        }
    }
}

impl StoreConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.model.bits > MAX_SIGNATURE_BITS {
            return Err(Error::invalid(format!(
                "stored signatures hold at most {MAX_SIGNATURE_BITS} bits, got {}",
                self.model.bits
            )));
        }
        if self.sigma == 0 || self.sigma > 1 << 32 {
            return Err(Error::invalid(format!(
                "sigma must be in 1..=2^32, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntryMetadata {
    pub id: u64,
    pub role: String,
    /// Microseconds since the Unix epoch, as supplied by the caller.
    pub timestamp: i64,
    pub session: String,
    /// First token position (inclusive).
    pub alpha: usize,
    /// Last token position (inclusive).
    pub beta: usize,
}

impl EntryMetadata {
    pub fn token_count(&self) -> usize {
        self.beta - self.alpha + 1
    }
}

/// Occurrence count of every distinct stored signature.
#[derive(Clone, Debug, Default)]
pub struct SignatureDictionary {
    index: HashMap<u128, usize>,
    entries: Vec<(u128, u64)>,
}

impl SignatureDictionary {
    pub fn from_counts(counts: Vec<(u128, u64)>) -> Result<Self> {
        let mut dict = Self::default();
        for (sig, count) in counts {
            if count == 0 {
                return Err(Error::invalid("dictionary count of zero"));
            }
            if dict.index.insert(sig, dict.entries.len()).is_some() {
                return Err(Error::invalid(format!("duplicate dictionary signature {sig}")));
            }
            dict.entries.push((sig, count));
        }
        Ok(dict)
    }

    pub fn add(&mut self, sig: u128) {
        match self.index.get(&sig) {
            Some(&slot) => self.entries[slot].1 += 1,
            None => {
                self.index.insert(sig, self.entries.len());
                self.entries.push((sig, 1));
            }
        }
    }

    pub fn count(&self, sig: u128) -> u64 {
        self.index.get(&sig).map_or(0, |&slot| self.entries[slot].1)
    }

    /// Distinct signatures.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u128, u64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn sorted(&self) -> Vec<(u128, u64)> {
        let mut v = self.entries.clone();
        v.sort_unstable();
        v
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StoreStats {
    pub entries: usize,
    pub tokens: usize,
    pub distinct_signatures: usize,
    pub vocabulary: usize,
    pub sigma: usize,
    pub content_levels: u32,
    pub signature_levels: u32,
    /// Bits held by each level of either matrix (equals `tokens`).
    pub bits_per_level: usize,
    pub payload_bits: usize,
    pub heap_bytes: usize,
    /// Matrix heap bytes beyond the packed payload, relative to the payload.
    pub index_overhead: f64,
}

impl fmt::Display for StoreStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "entries              {}", self.entries)?;
        writeln!(f, "tokens               {}", self.tokens)?;
        writeln!(f, "distinct signatures  {}", self.distinct_signatures)?;
        writeln!(f, "vocabulary           {} / {}", self.vocabulary, self.sigma)?;
        writeln!(
            f,
            "levels               {} content + {} signature, {} bits each",
            self.content_levels, self.signature_levels, self.bits_per_level
        )?;
        writeln!(f, "payload bits         {}", self.payload_bits)?;
        writeln!(f, "matrix heap bytes    {}", self.heap_bytes)?;
        write!(f, "index overhead       {:.3}", self.index_overhead)
    }
}

pub struct MemoryStore {
    config: StoreConfig,
    tokenizer: Arc<dyn Tokenizer>,
    vocab: Vocabulary,
    content: DynamicWaveletMatrix<u32>,
    signatures: DynamicWaveletMatrix<u128>,
    entries: Vec<EntryMetadata>,
    dictionary: SignatureDictionary,
    model: RandomIndexModel,
    /// Base vector of every vocabulary id.
    bases: Vec<SparseTernary>,
}

impl fmt::Debug for MemoryStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MemoryStore")
            .field("config", &self.config)
            .field("entries", &self.entries.len())
            .field("tokens", &self.len())
            .finish_non_exhaustive()
    }
}

impl MemoryStore {
    pub fn new(config: StoreConfig) -> Result<Self> {
        config.validate()?;
        let vocab = Vocabulary::new(config.sigma)?;
        let content = DynamicWaveletMatrix::new(vocab.width())?;
        let signatures = DynamicWaveletMatrix::new(config.model.bits as u32)?;
        let model = RandomIndexModel::new(config.model.clone())?;
        Ok(Self {
            config,
            tokenizer: Arc::new(CanonicalTokenizer),
            vocab,
            content,
            signatures,
            entries: Vec::new(),
            dictionary: SignatureDictionary::default(),
            model,
            bases: Vec::new(),
        })
    }

    /// Assembles a store from decoded parts and checks its invariants.
    pub(crate) fn from_parts(
        config: StoreConfig,
        vocab: Vocabulary,
        content: DynamicWaveletMatrix<u32>,
        signatures: DynamicWaveletMatrix<u128>,
        entries: Vec<EntryMetadata>,
        dictionary: SignatureDictionary,
    ) -> Result<Self> {
        let mut store = Self::new(config)?;
        if content.width() != store.content.width()
            || signatures.width() != store.signatures.width()
        {
            return Err(Error::invalid("matrix widths disagree with the configuration"));
        }
        store.bases = vocab
            .tokens()
            .iter()
            .map(|t| store.model.base_vector(t))
            .collect();
        store.vocab = vocab;
        store.content = content;
        store.signatures = signatures;
        store.entries = entries;
        store.dictionary = dictionary;
        store.check_invariants(Some(256))?;
        Ok(store)
    }

    pub fn with_tokenizer(mut self, tokenizer: Arc<dyn Tokenizer>) -> Self {
        self.tokenizer = tokenizer;
        self
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn tokenizer(&self) -> &dyn Tokenizer {
        self.tokenizer.as_ref()
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn content(&self) -> &DynamicWaveletMatrix<u32> {
        &self.content
    }

    pub fn signatures(&self) -> &DynamicWaveletMatrix<u128> {
        &self.signatures
    }

    pub fn dictionary(&self) -> &SignatureDictionary {
        &self.dictionary
    }

    pub fn model(&self) -> &RandomIndexModel {
        &self.model
    }

    pub fn entries(&self) -> &[EntryMetadata] {
        &self.entries
    }

    /// Tokens stored.
    pub fn len(&self) -> usize {
        self.content.len()
    }

    pub fn is_empty(&self) -> bool {
        self.content.is_empty()
    }

    /// Appends one entry. On error nothing is modified.
    pub fn ingest_entry(
        &mut self,
        role: &str,
        timestamp: i64,
        session: &str,
        text: &str,
    ) -> Result<u64> {
        let tokens = self.tokenizer.tokenize(text);
        if tokens.is_empty() {
            return Err(Error::invalid("entry text has no tokens"));
        }
        let ids = self.vocab.encode(&tokens)?;
        for tok in &self.vocab.tokens()[self.bases.len()..] {
            self.bases.push(self.model.base_vector(tok));
        }
        let bases: Vec<&SparseTernary> = ids.iter().map(|&id| &self.bases[id as usize]).collect();
        let sigs = self.model.entry_signatures(&bases);

        let alpha = self.len();
        for (&id, sig) in ids.iter().zip(&sigs) {
            let symbol = sig.to_symbol().expect("signature width checked at creation");
            self.content.append(id).expect("ids fit the vocabulary width");
            self.signatures
                .append(symbol)
                .expect("signature fits the matrix width");
            self.dictionary.add(symbol);
        }
        let id = self.entries.len() as u64;
        self.entries.push(EntryMetadata {
            id,
            role: role.to_owned(),
            timestamp,
            session: session.to_owned(),
            alpha,
            beta: self.len() - 1,
        });
        Ok(id)
    }

    /// The entry whose span covers token position `i`.
    pub fn covering_entry(&self, i: usize) -> Result<&EntryMetadata> {
        if i >= self.len() {
            return Err(Error::out_of_bounds(i, self.len()));
        }
        let k = self.entries.partition_point(|e| e.alpha <= i);
        Ok(&self.entries[k - 1])
    }

    /// Token ids at positions `alpha..=beta`.
    pub fn reconstruct(&self, alpha: usize, beta: usize) -> Result<Vec<u32>> {
        if beta >= self.len() {
            return Err(Error::out_of_bounds(beta, self.len()));
        }
        if alpha > beta {
            return Err(Error::invalid(format!("span {alpha}..={beta} is reversed")));
        }
        (alpha..=beta).map(|i| self.content.access(i)).collect()
    }

    pub fn detokenize(&self, ids: &[u32]) -> Result<String> {
        self.vocab.detokenize(self.tokenizer.as_ref(), ids)
    }

    pub fn entry_text(&self, entry: &EntryMetadata) -> Result<String> {
        self.detokenize(&self.reconstruct(entry.alpha, entry.beta)?)
    }

    pub fn signature_at(&self, i: usize) -> Result<Signature> {
        let symbol = self.signatures.access(i)?;
        Ok(Signature::from_symbol(symbol, self.config.model.bits))
    }

    /// Signature of a keyword under this store's model and tokenizer.
    pub fn keyword_signature(&self, keyword: &str) -> Result<Signature> {
        self.model.query_signature(&self.tokenizer.tokenize(keyword))
    }

    pub fn stats(&self) -> StoreStats {
        let payload_bits = self.content.payload_bits() + self.signatures.payload_bits();
        let heap_bytes = self.content.heap_bytes() + self.signatures.heap_bytes();
        let index_overhead = if payload_bits == 0 {
            0.0
        } else {
            (heap_bytes as f64 * 8.0 - payload_bits as f64).max(0.0) / payload_bits as f64
        };
        StoreStats {
            entries: self.entries.len(),
            tokens: self.len(),
            distinct_signatures: self.dictionary.len(),
            vocabulary: self.vocab.len(),
            sigma: self.config.sigma,
            content_levels: self.content.width(),
            signature_levels: self.signatures.width(),
            bits_per_level: self.len(),
            payload_bits,
            heap_bytes,
            index_overhead,
        }
    }

    /// Checks parallel lengths, span contiguity and dictionary consistency.
    /// `dictionary_probes` bounds how many dictionary counts are compared
    /// against signature-matrix ranks; `None` checks all of them.
    pub fn check_invariants(&self, dictionary_probes: Option<usize>) -> Result<()> {
        let n = self.len();
        if self.signatures.len() != n {
            return Err(Error::Corrupt(format!(
                "content holds {n} tokens, signatures {}",
                self.signatures.len()
            )));
        }
        if self.bases.len() != self.vocab.len() {
            return Err(Error::Corrupt("base vector cache out of step".into()));
        }
        let mut next = 0;
        for (k, e) in self.entries.iter().enumerate() {
            if e.id != k as u64 || e.alpha != next || e.beta < e.alpha {
                return Err(Error::Corrupt(format!(
                    "entry {k} spans {}..={} (id {}), expected start {next}",
                    e.alpha, e.beta, e.id
                )));
            }
            next = e.beta + 1;
        }
        if next != n {
            return Err(Error::Corrupt(format!("entries cover {next} of {n} tokens")));
        }
        if self.dictionary.total() != n as u64 {
            return Err(Error::Corrupt(format!(
                "dictionary counts sum to {}, expected {n}",
                self.dictionary.total()
            )));
        }
        let probes = dictionary_probes.unwrap_or(usize::MAX).min(self.dictionary.len());
        if let Some(step) = self.dictionary.len().checked_div(probes) {
            for (sig, count) in self.dictionary.iter().step_by(step.max(1)).take(probes) {
                let rank = self.signatures.rank(sig, n)?;
                if rank as u64 != count {
                    return Err(Error::Corrupt(format!(
                        "signature {sig:#x}: dictionary count {count}, matrix rank {rank}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A store behind a reader-writer lock: one ingest at a time, any number of
/// concurrent readers, and no reader ever sees a half-ingested entry.
#[derive(Clone, Debug)]
pub struct SharedStore {
    inner: Arc<RwLock<MemoryStore>>,
}

impl SharedStore {
    pub fn new(store: MemoryStore) -> Self {
        Self {
            inner: Arc::new(RwLock::new(store)),
        }
    }

    pub fn ingest_entry(&self, role: &str, timestamp: i64, session: &str, text: &str) -> Result<u64> {
        let mut store = self.inner.write().unwrap_or_else(|e| e.into_inner());
        store.ingest_entry(role, timestamp, session, text)
    }

    pub fn read(&self) -> RwLockReadGuard<'_, MemoryStore> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }
}
