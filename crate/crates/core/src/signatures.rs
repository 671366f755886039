//! Streaming random indexing and binary token signatures.
//!
//! Every token owns a sparse ternary base vector derived from a keyed hash of
//! the master seed and the token's surface string. A token's context
//! embedding is the integer sum of the base vectors inside a window around
//! it, clamped to the entry that holds it. Embeddings are binarized to `d`
//! bits either by signs of random hyperplane projections (the default) or by
//! the signs of the `d` largest-magnitude components.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum SignatureMode {
    /// Bit `k` is the sign of the projection onto random direction `k`.
    #[default]
    Hyperplane,
    /// Bits are the signs of the `d` largest-magnitude components, read in
    /// ascending component order.
    TopD,
}

impl SignatureMode {
    pub fn code(self) -> u8 {
        match self {
            SignatureMode::Hyperplane => 0,
            SignatureMode::TopD => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(SignatureMode::Hyperplane),
            1 => Some(SignatureMode::TopD),
            _ => None,
        }
    }
}

impl fmt::Display for SignatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignatureMode::Hyperplane => "hyperplane",
            SignatureMode::TopD => "topd",
        })
    }
}

impl FromStr for SignatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hyperplane" => Ok(SignatureMode::Hyperplane),
            "topd" | "top-d" => Ok(SignatureMode::TopD),
            other => Err(Error::invalid(format!("unknown signature mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelParams {
    /// Embedding dimensionality `D`.
    pub dims: usize,
    /// Signature length `d`.
    pub bits: usize,
    /// Non-zero entries per base vector `t`.
    pub nnz: usize,
    /// Tokens aggregated on each side of the centre token.
    pub window: usize,
    pub seed: u64,
    pub mode: SignatureMode,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            dims: 1024,
            bits: 32,
            nnz: 8,
            window: 2,
            seed: 0x4849_5050_4f44_574d,
            mode: SignatureMode::Hyperplane,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 || self.dims > u32::MAX as usize {
            return Err(Error::invalid(format!("dims must be positive, got {}", self.dims)));
        }
        if self.bits == 0 || self.bits > self.dims {
            return Err(Error::invalid(format!(
                "signature bits must be in 1..={}, got {}",
                self.dims, self.bits
            )));
        }
        if self.nnz == 0 || self.nnz > self.dims {
            return Err(Error::invalid(format!(
                "non-zeros per base vector must be in 1..={}, got {}",
                self.dims, self.nnz
            )));
        }
        Ok(())
    }
}

/// Sparse `{-1, 0, +1}` vector, entries sorted by component index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseTernary {
    entries: Vec<(u32, i8)>,
}

impl SparseTernary {
    pub fn entries(&self) -> &[(u32, i8)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn dot(&self, other: &SparseTernary) -> i64 {
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        let mut sum = 0i64;
        while let (Some(&&(i, x)), Some(&&(j, y))) = (a.peek(), b.peek()) {
            match i.cmp(&j) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    sum += x as i64 * y as i64;
                    a.next();
                    b.next();
                }
            }
        }
        sum
    }

    pub fn to_dense(&self, dims: usize) -> Vec<i32> {
        let mut v = vec![0; dims];
        for &(i, s) in &self.entries {
            v[i as usize] += s as i32;
        }
        v
    }
}

/// Integer sum of base vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextEmbedding {
    components: Vec<i32>,
}

impl ContextEmbedding {
    pub fn zeros(dims: usize) -> Self {
        Self {
            components: vec![0; dims],
        }
    }

    pub fn from_components(components: Vec<i32>) -> Self {
        Self { components }
    }

    pub fn components(&self) -> &[i32] {
        &self.components
    }

    pub fn dims(&self) -> usize {
        self.components.len()
    }

    pub fn add(&mut self, v: &SparseTernary) {
        for &(i, s) in &v.entries {
            self.components[i as usize] += s as i32;
        }
    }

    pub fn sub(&mut self, v: &SparseTernary) {
        for &(i, s) in &v.entries {
            self.components[i as usize] -= s as i32;
        }
    }

    pub fn neg(&self) -> Self {
        Self::from_components(self.components.iter().map(|c| -c).collect())
    }
}

/// Fixed-length bit string. Bit 0 is the most significant bit of the
/// integer form used as a wavelet-matrix symbol.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature {
    len: usize,
    words: Vec<u64>,
}

impl Signature {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    /// Parses a string of `0`/`1` characters, bit 0 first.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        let mut sig = Self::zeros(s.len());
        for (k, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => sig.set(k, true),
                _ => return Err(Error::invalid(format!("not a bit string: {s:?}"))),
            }
        }
        Ok(sig)
    }

    /// The low `len` bits of `symbol`, most significant first.
    pub fn from_symbol(symbol: u128, len: usize) -> Self {
        assert!(len <= 128, "symbol form holds at most 128 bits");
        let mut sig = Self::zeros(len);
        for k in 0..len {
            if (symbol >> (len - 1 - k)) & 1 == 1 {
                sig.set(k, true);
            }
        }
        sig
    }

    /// Integer form, `None` beyond 128 bits.
    pub fn to_symbol(&self) -> Option<u128> {
        if self.len > 128 {
            return None;
        }
        Some((0..self.len).fold(0u128, |acc, k| (acc << 1) | self.get(k) as u128))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, k: usize) -> bool {
        assert!(k < self.len);
        (self.words[k / 64] >> (k % 64)) & 1 == 1
    }

    pub fn set(&mut self, k: usize, bit: bool) {
        assert!(k < self.len);
        if bit {
            self.words[k / 64] |= 1 << (k % 64);
        } else {
            self.words[k / 64] &= !(1 << (k % 64));
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..self.len {
            f.write_str(if self.get(k) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({self})")
    }
}

/// XOR + popcount distance.
pub fn hamming(a: &Signature, b: &Signature) -> Result<u32> {
    if a.len != b.len {
        return Err(Error::invalid(format!(
            "signature lengths differ: {} vs {}",
            a.len, b.len
        )));
    }
    Ok(a.words
        .iter()
        .zip(&b.words)
        .map(|(x, y)| (x ^ y).count_ones())
        .sum())
}

pub fn within_ball(q: &Signature, s: &Signature, radius: u32) -> Result<bool> {
    Ok(hamming(q, s)? <= radius)
}

#[derive(Clone, Debug)]
pub struct RandomIndexModel {
    params: ModelParams,
    /// Hyperplane directions, component-major: `directions[i * d + k]` is
    /// component `i` of direction `k`.
    directions: Vec<f64>,
}

impl RandomIndexModel {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let directions = match params.mode {
            SignatureMode::Hyperplane => hyperplanes(&params),
            SignatureMode::TopD => Vec::new(),
        };
        Ok(Self { params, directions })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn bits(&self) -> usize {
        self.params.bits
    }

    pub fn base_vector(&self, token: &str) -> SparseTernary {
        let mut hasher = Sha256::new();
        hasher.update(b"hippo/base-vector/v1");
        hasher.update(self.params.seed.to_le_bytes());
        hasher.update(token.as_bytes());
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&hasher.finalize());
        let mut rng = ChaCha8Rng::from_seed(seed);

        let t = self.params.nnz;
        let plus = t.div_ceil(2);
        let mut entries: Vec<(u32, i8)> = index::sample(&mut rng, self.params.dims, t)
            .into_iter()
            .enumerate()
            .map(|(n, i)| (i as u32, if n < plus { 1 } else { -1 }))
            .collect();
        entries.sort_unstable_by_key(|&(i, _)| i);
        SparseTernary { entries }
    }

    /// Sum of the base vectors of `tokens[j]` for `|j - i| <= window`,
    /// restricted to `bounds`.
    pub fn context_embedding<T: AsRef<str>>(
        &self,
        tokens: &[T],
        i: usize,
        bounds: Range<usize>,
    ) -> Result<ContextEmbedding> {
        if bounds.end > tokens.len() || bounds.start > bounds.end {
            return Err(Error::out_of_bounds(bounds.end, tokens.len()));
        }
        if !bounds.contains(&i) {
            return Err(Error::out_of_bounds(i, bounds.end));
        }
        let lo = i.saturating_sub(self.params.window).max(bounds.start);
        let hi = (i + self.params.window + 1).min(bounds.end);
        let mut e = ContextEmbedding::zeros(self.params.dims);
        for tok in &tokens[lo..hi] {
            e.add(&self.base_vector(tok.as_ref()));
        }
        Ok(e)
    }

    pub fn signature_of(&self, e: &ContextEmbedding) -> Result<Signature> {
        if e.dims() != self.params.dims {
            return Err(Error::invalid(format!(
                "embedding has {} components, model expects {}",
                e.dims(),
                self.params.dims
            )));
        }
        Ok(match self.params.mode {
            SignatureMode::Hyperplane => self.hyperplane_bits(e),
            SignatureMode::TopD => self.top_d_bits(e),
        })
    }

    fn hyperplane_bits(&self, e: &ContextEmbedding) -> Signature {
        let d = self.params.bits;
        let mut acc = vec![0f64; d];
        for (i, &c) in e.components.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let c = c as f64;
            let row = &self.directions[i * d..(i + 1) * d];
            for (a, r) in acc.iter_mut().zip(row) {
                *a += c * r;
            }
        }
        let mut sig = Signature::zeros(d);
        for (k, &a) in acc.iter().enumerate() {
            if a > 0.0 {
                sig.set(k, true);
            }
        }
        sig
    }

    fn top_d_bits(&self, e: &ContextEmbedding) -> Signature {
        let d = self.params.bits;
        let c = &e.components;
        // Larger magnitude first, lower index on ties.
        let key = |&i: &usize| (std::cmp::Reverse(c[i].unsigned_abs()), i);
        let mut idx: Vec<usize> = (0..c.len()).collect();
        if d < idx.len() {
            idx.select_nth_unstable_by_key(d - 1, key);
            idx.truncate(d);
        }
        idx.sort_unstable();
        let mut sig = Signature::zeros(d);
        for (k, &i) in idx.iter().enumerate() {
            if c[i] > 0 {
                sig.set(k, true);
            }
        }
        sig
    }

    /// Signature of a keyword: its tokens' base vectors summed, no window.
    pub fn query_signature<T: AsRef<str>>(&self, tokens: &[T]) -> Result<Signature> {
        if tokens.is_empty() {
            return Err(Error::invalid("keyword has no tokens"));
        }
        let mut e = ContextEmbedding::zeros(self.params.dims);
        for tok in tokens {
            e.add(&self.base_vector(tok.as_ref()));
        }
        self.signature_of(&e)
    }

    /// Windowed signatures for every position of one entry, given the base
    /// vectors of its tokens in order. Slides one accumulator across the
    /// entry instead of re-summing each window.
    pub fn entry_signatures(&self, bases: &[&SparseTernary]) -> Vec<Signature> {
        let w = self.params.window;
        let n = bases.len();
        let mut e = ContextEmbedding::zeros(self.params.dims);
        for b in &bases[..n.min(w)] {
            e.add(b);
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            if i + w < n {
                e.add(bases[i + w]);
            }
            if i > w {
                e.sub(bases[i - w - 1]);
            }
            out.push(match self.params.mode {
                SignatureMode::Hyperplane => self.hyperplane_bits(&e),
                SignatureMode::TopD => self.top_d_bits(&e),
            });
        }
        out
    }
}

fn hyperplanes(params: &ModelParams) -> Vec<f64> {
    let (dims, d) = (params.dims, params.bits);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut directions = vec![0f64; dims * d];
    // Direction k is drawn whole before direction k + 1, so a model with
    // fewer bits shares its directions with a longer one.
    for k in 0..d {
        for i in 0..dims {
            directions[i * d + k] = StandardNormal.sample(&mut rng);
        }
    }
    directions
}
