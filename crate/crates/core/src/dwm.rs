//! Dynamic wavelet matrix: an append-only sequence of fixed-width integer
//! symbols stored as bit planes, queried without decompression.
//!
//! Level 0 holds the most significant bit of every symbol in arrival order.
//! Level `k + 1` holds bit `k + 1` of every symbol, stably partitioned by
//! bit `k`: symbols whose bit `k` is 0 come first (there are `zeros[k]` of
//! them), then those whose bit `k` is 1. Appending places the new symbol's
//! bits by a single top-down walk, so after every append the planes are
//! exactly those a batch construction of the same prefix would produce.

use std::fmt::Debug;
use std::hash::Hash;

use crate::bitvec::DynamicBitVector;
use crate::error::{Error, Result};

/// Unsigned integer usable as a wavelet-matrix symbol.
pub trait Symbol: Copy + Eq + Ord + Hash + Debug + Default + Send + Sync + 'static {
    const BITS: u32;

    /// Bit `k`, counted from the least significant end.
    fn bit(self, k: u32) -> bool;
    fn set_bit(self, k: u32) -> Self;
    fn to_u128(self) -> u128;
}

macro_rules! impl_symbol {
    ($($t:ty),*) => {$(
        impl Symbol for $t {
            const BITS: u32 = <$t>::BITS;

            #[inline]
            fn bit(self, k: u32) -> bool {
                (self >> k) & 1 == 1
            }

            #[inline]
            fn set_bit(self, k: u32) -> Self {
                self | (1 << k)
            }

            #[inline]
            fn to_u128(self) -> u128 {
                self as u128
            }
        }
    )*};
}

impl_symbol!(u8, u16, u32, u64, u128);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DynamicWaveletMatrix<S: Symbol = u64> {
    width: u32,
    levels: Vec<DynamicBitVector>,
    zeros: Vec<usize>,
    len: usize,
    _symbol: std::marker::PhantomData<S>,
}

impl<S: Symbol> DynamicWaveletMatrix<S> {
    /// An empty matrix over symbols of `width` bits, `1 <= width <= S::BITS`.
    pub fn new(width: u32) -> Result<Self> {
        if width == 0 || width > S::BITS {
            return Err(Error::invalid(format!(
                "wavelet matrix width must be in 1..={}, got {width}",
                S::BITS
            )));
        }
        Ok(Self {
            width,
            levels: (0..width).map(|_| DynamicBitVector::new()).collect(),
            zeros: vec![0; width as usize],
            len: 0,
            _symbol: std::marker::PhantomData,
        })
    }

    /// Reassembles a matrix from stored planes, checking that every plane
    /// has the same length and that `zeros` agrees with the planes.
    pub fn from_levels(levels: Vec<DynamicBitVector>, zeros: Vec<usize>) -> Result<Self> {
        let width = levels.len() as u32;
        let mut dwm = Self::new(width)?;
        if zeros.len() != levels.len() {
            return Err(Error::invalid("one zero count per level required"));
        }
        let len = levels[0].len();
        for (k, (level, &z)) in levels.iter().zip(&zeros).enumerate() {
            if level.len() != len {
                return Err(Error::invalid(format!(
                    "level {k} holds {} bits, level 0 holds {len}",
                    level.len()
                )));
            }
            if level.count_zeros() != z {
                return Err(Error::invalid(format!(
                    "level {k} zero count {z} disagrees with its bits ({})",
                    level.count_zeros()
                )));
            }
        }
        dwm.levels = levels;
        dwm.zeros = zeros;
        dwm.len = len;
        Ok(dwm)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn levels(&self) -> &[DynamicBitVector] {
        &self.levels
    }

    /// Number of 0-bits on each level.
    pub fn zeros(&self) -> &[usize] {
        &self.zeros
    }

    /// Bit of `symbol` stored on level `k` (MSB on level 0).
    #[inline]
    fn level_bit(&self, symbol: S, k: usize) -> bool {
        symbol.bit(self.width - 1 - k as u32)
    }

    fn check_symbol(&self, symbol: S) -> Result<()> {
        if self.width < S::BITS && symbol.to_u128() >> self.width != 0 {
            return Err(Error::SymbolOutOfAlphabet {
                symbol: symbol.to_u128(),
                width: self.width,
            });
        }
        Ok(())
    }

    /// Maps position `p` on level `k` to the position of the same symbol on
    /// level `k + 1`.
    #[inline]
    fn descend(&self, k: usize, p: usize, bit: bool) -> usize {
        let rank = self.levels[k].rank_unchecked(p, bit);
        if bit {
            self.zeros[k] + rank
        } else {
            rank
        }
    }

    pub fn append(&mut self, symbol: S) -> Result<()> {
        self.check_symbol(symbol)?;
        let mut p = self.len;
        for k in 0..self.width as usize {
            let bit = self.level_bit(symbol, k);
            let rank = self.levels[k].insert_rank(p, bit);
            p = if bit {
                self.zeros[k] + rank
            } else {
                self.zeros[k] += 1;
                rank
            };
        }
        self.len += 1;
        Ok(())
    }

    pub fn access(&self, i: usize) -> Result<S> {
        if i >= self.len {
            return Err(Error::out_of_bounds(i, self.len));
        }
        let mut p = i;
        let mut symbol = S::default();
        for k in 0..self.width as usize {
            let bit = self.levels[k].get_unchecked(p);
            if bit {
                symbol = symbol.set_bit(self.width - 1 - k as u32);
            }
            p = self.descend(k, p, bit);
        }
        Ok(symbol)
    }

    /// Narrows `[lo, hi)` on level 0 to the interval holding `symbol` on the
    /// virtual level below the last plane.
    #[inline]
    fn narrow(&self, symbol: S, mut lo: usize, mut hi: usize) -> (usize, usize) {
        for k in 0..self.width as usize {
            if lo == hi {
                break;
            }
            let bit = self.level_bit(symbol, k);
            lo = self.descend(k, lo, bit);
            hi = self.descend(k, hi, bit);
        }
        (lo, hi)
    }

    /// Occurrences of `symbol` in `S[0, i)`.
    pub fn rank(&self, symbol: S, i: usize) -> Result<usize> {
        self.range_count(symbol, 0, i)
    }

    /// Occurrences of `symbol` in `S[lo, hi)`.
    pub fn range_count(&self, symbol: S, lo: usize, hi: usize) -> Result<usize> {
        if hi > self.len {
            return Err(Error::out_of_bounds(hi, self.len));
        }
        if lo > hi {
            return Err(Error::invalid(format!("empty range {lo}..{hi} reversed")));
        }
        self.check_symbol(symbol)?;
        let (lo, hi) = self.narrow(symbol, lo, hi);
        Ok(hi - lo)
    }

    /// Position of the `j`-th (1-based) occurrence of `symbol`, or `None`
    /// when it occurs fewer than `j` times (or does not fit the width).
    pub fn select(&self, symbol: S, j: usize) -> Option<usize> {
        if j == 0 || self.check_symbol(symbol).is_err() {
            return None;
        }
        let (lo, hi) = self.narrow(symbol, 0, self.len);
        if j > hi - lo {
            return None;
        }
        let mut p = lo + (j - 1);
        for k in (0..self.width as usize).rev() {
            p = if self.level_bit(symbol, k) {
                self.levels[k].select1((p - self.zeros[k]) + 1)?
            } else {
                self.levels[k].select0(p + 1)?
            };
        }
        Some(p)
    }

    pub fn iter(&self) -> impl Iterator<Item = S> + '_ {
        (0..self.len).map(move |i| self.access(i).expect("index below len"))
    }

    /// Bits of symbol payload, `width * len`.
    pub fn payload_bits(&self) -> usize {
        self.width as usize * self.len
    }

    /// Heap bytes held by all planes, payload included.
    pub fn heap_bytes(&self) -> usize {
        self.levels.iter().map(DynamicBitVector::heap_bytes).sum::<usize>()
            + self.zeros.capacity() * std::mem::size_of::<usize>()
    }

    /// Index bytes beyond the packed payload, as a fraction of the payload.
    pub fn overhead_ratio(&self) -> f64 {
        let payload = self.payload_bits() as f64 / 8.0;
        if payload == 0.0 {
            return 0.0;
        }
        (self.heap_bytes() as f64 - payload).max(0.0) / payload
    }
}
