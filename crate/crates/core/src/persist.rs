//! Single-file store image. All integers are little-endian; the layout is
//! described field by field in FORMAT.md at the repository root.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::bitvec::DynamicBitVector;
use crate::dwm::{DynamicWaveletMatrix, Symbol};
use crate::error::{Error, Result};
use crate::signatures::{ModelParams, SignatureMode};
use crate::store::{EntryMetadata, MemoryStore, SignatureDictionary, StoreConfig, Vocabulary};

pub const MAGIC: &[u8; 8] = b"HIPPODWM";
pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_BYTES: usize = 8;

/// Byte counts of each section of an encoded image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ImageLayout {
    pub header: usize,
    pub vocabulary: usize,
    pub content_levels: usize,
    pub signature_levels: usize,
    pub metadata: usize,
    pub dictionary: usize,
    pub checksum: usize,
}

impl ImageLayout {
    pub fn total(&self) -> usize {
        self.header
            + self.vocabulary
            + self.content_levels
            + self.signature_levels
            + self.metadata
            + self.dictionary
            + self.checksum
    }

    pub fn levels(&self) -> usize {
        self.content_levels + self.signature_levels
    }
}

/// First eight bytes of SHA-256, read little-endian.
pub fn checksum(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

pub fn to_bytes(store: &MemoryStore) -> Vec<u8> {
    encode(store).0
}

/// Encodes the store and reports how the bytes split across sections.
pub fn encode(store: &MemoryStore) -> (Vec<u8>, ImageLayout) {
    let cfg = store.config();
    let m = &cfg.model;
    let mut out = Vec::new();
    let mut layout = ImageLayout::default();
    let mut mark = 0;
    let mut close = |out: &Vec<u8>, field: &mut usize| {
        *field = out.len() - mark;
        mark = out.len();
    };

    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u64(&mut out, cfg.sigma as u64);
    put_u32(&mut out, store.content().width());
    put_u32(&mut out, m.dims as u32);
    put_u32(&mut out, m.bits as u32);
    put_u32(&mut out, m.nnz as u32);
    put_u32(&mut out, m.window as u32);
    put_u64(&mut out, m.seed);
    out.push(m.mode.code());
    put_u64(&mut out, store.len() as u64);
    put_u64(&mut out, store.entries().len() as u64);
    put_u64(&mut out, store.vocabulary().len() as u64);
    close(&out, &mut layout.header);

    for tok in store.vocabulary().tokens() {
        put_str(&mut out, tok);
    }
    close(&out, &mut layout.vocabulary);

    put_levels(&mut out, store.content());
    close(&out, &mut layout.content_levels);
    put_levels(&mut out, store.signatures());
    close(&out, &mut layout.signature_levels);

    for e in store.entries() {
        put_u64(&mut out, e.id);
        put_u64(&mut out, e.alpha as u64);
        put_u64(&mut out, e.beta as u64);
        put_u64(&mut out, e.timestamp as u64);
        put_str(&mut out, &e.role);
        put_str(&mut out, &e.session);
    }
    close(&out, &mut layout.metadata);

    let sig_bytes = m.bits.div_ceil(8);
    let dict = store.dictionary().sorted();
    put_u64(&mut out, dict.len() as u64);
    for (sig, count) in dict {
        out.extend_from_slice(&sig.to_le_bytes()[..sig_bytes]);
        put_u64(&mut out, count);
    }
    close(&out, &mut layout.dictionary);

    let sum = checksum(&out);
    put_u64(&mut out, sum);
    layout.checksum = CHECKSUM_BYTES;
    (out, layout)
}

/// Writes the image through a temporary file in the destination directory
/// and renames it into place. Returns the bytes written.
pub fn save(store: &MemoryStore, path: impl AsRef<Path>) -> Result<u64> {
    let path = path.as_ref();
    let bytes = to_bytes(store);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(bytes.len() as u64)
}

pub fn load(path: impl AsRef<Path>) -> Result<MemoryStore> {
    from_bytes(&fs::read(path)?)
}

/// Decodes an image. Checks run in order: magic, version, checksum, then
/// section structure and store invariants.
pub fn from_bytes(bytes: &[u8]) -> Result<MemoryStore> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Format("not a store image (bad magic)".into()));
    }
    let mut r = Reader::new(&bytes[MAGIC.len()..]);
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    if bytes.len() < MAGIC.len() + 4 + CHECKSUM_BYTES {
        return Err(Error::Corrupt("truncated image".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - CHECKSUM_BYTES);
    let stored = u64::from_le_bytes(tail.try_into().expect("eight bytes"));
    if checksum(body) != stored {
        return Err(Error::Corrupt("checksum mismatch".into()));
    }

    let mut r = Reader::new(&body[MAGIC.len() + 4..]);
    let sigma = r.u64()? as usize;
    let width = r.u32()?;
    let dims = r.u32()? as usize;
    let bits = r.u32()? as usize;
    let nnz = r.u32()? as usize;
    let window = r.u32()? as usize;
    let seed = r.u64()?;
    let mode_code = r.u8()?;
    let mode = SignatureMode::from_code(mode_code)
        .ok_or_else(|| Error::Corrupt(format!("unknown signature mode {mode_code}")))?;
    let n = r.u64()? as usize;
    let entry_count = r.u64()? as usize;
    let vocab_len = r.u64()? as usize;

    let config = StoreConfig {
        sigma,
        model: ModelParams {
            dims,
            bits,
            nnz,
            window,
            seed,
            mode,
        },
    };
    config
        .validate()
        .map_err(|e| Error::Corrupt(format!("header: {e}")))?;

    let mut tokens = Vec::with_capacity(vocab_len.min(r.remaining()));
    for _ in 0..vocab_len {
        tokens.push(r.string()?);
    }
    let vocab = Vocabulary::from_tokens(sigma, tokens).map_err(corrupt("vocabulary"))?;
    if vocab.width() != width {
        return Err(Error::Corrupt(format!(
            "content width {width} does not match sigma {sigma}"
        )));
    }

    let content: DynamicWaveletMatrix<u32> = r.levels(width, n)?;
    let signatures: DynamicWaveletMatrix<u128> = r.levels(bits as u32, n)?;

    let mut entries = Vec::with_capacity(entry_count.min(r.remaining()));
    for _ in 0..entry_count {
        let id = r.u64()?;
        let alpha = r.u64()? as usize;
        let beta = r.u64()? as usize;
        let timestamp = r.u64()? as i64;
        let role = r.string()?;
        let session = r.string()?;
        entries.push(EntryMetadata {
            id,
            role,
            timestamp,
            session,
            alpha,
            beta,
        });
    }

    let sig_bytes = bits.div_ceil(8);
    let distinct = r.u64()? as usize;
    let mut counts = Vec::with_capacity(distinct.min(r.remaining()));
    let mut prev = None;
    for _ in 0..distinct {
        let mut buf = [0u8; 16];
        buf[..sig_bytes].copy_from_slice(r.take(sig_bytes)?);
        let sig = u128::from_le_bytes(buf);
        if prev.is_some_and(|p| p >= sig) {
            return Err(Error::Corrupt("dictionary not sorted".into()));
        }
        prev = Some(sig);
        counts.push((sig, r.u64()?));
    }
    let dictionary = SignatureDictionary::from_counts(counts).map_err(corrupt("dictionary"))?;
    if r.remaining() != 0 {
        return Err(Error::Corrupt(format!("{} trailing bytes", r.remaining())));
    }

    MemoryStore::from_parts(config, vocab, content, signatures, entries, dictionary).map_err(
        |e| match e {
            Error::Corrupt(_) => e,
            other => Error::Corrupt(other.to_string()),
        },
    )
}

fn corrupt(section: &'static str) -> impl Fn(Error) -> Error {
    move |e| Error::Corrupt(format!("{section}: {e}"))
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

fn put_levels<S: Symbol>(out: &mut Vec<u8>, m: &DynamicWaveletMatrix<S>) {
    for (level, &zeros) in m.levels().iter().zip(m.zeros()) {
        put_u64(out, level.len() as u64);
        let bytes = level.len().div_ceil(8);
        let start = out.len();
        for w in level.to_words() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(start + bytes);
        put_u64(out, zeros as u64);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    fn remaining(&self) -> usize {
        self.buf.len()
    }

    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if k > self.buf.len() {
            return Err(Error::Corrupt("truncated image".into()));
        }
        let (head, rest) = self.buf.split_at(k);
        self.buf = rest;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::Corrupt("string is not UTF-8".into()))
    }

    fn levels<S: Symbol>(&mut self, width: u32, n: usize) -> Result<DynamicWaveletMatrix<S>> {
        let mut levels = Vec::with_capacity(width as usize);
        let mut zeros = Vec::with_capacity(width as usize);
        for k in 0..width {
            let len = self.u64()? as usize;
            if len != n {
                return Err(Error::Corrupt(format!("level {k} holds {len} bits, expected {n}")));
            }
            let bytes = self.take(len.div_ceil(8))?;
            if !len.is_multiple_of(8) && bytes[bytes.len() - 1] >> (len % 8) != 0 {
                return Err(Error::Corrupt(format!("level {k} has bits past its length")));
            }
            let words: Vec<u64> = bytes
                .chunks(8)
                .map(|c| {
                    let mut w = [0u8; 8];
                    w[..c.len()].copy_from_slice(c);
                    u64::from_le_bytes(w)
                })
                .collect();
            levels.push(DynamicBitVector::from_words(&words, len).map_err(corrupt("level"))?);
            zeros.push(self.u64()? as usize);
        }
        DynamicWaveletMatrix::from_levels(levels, zeros).map_err(corrupt("levels"))
    }
}
