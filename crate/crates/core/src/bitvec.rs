//! Insertable bit vector with logarithmic rank, select and access.
//!
//! Bits live in packed blocks of at most [`LEAF_BITS`] bits held by a B+-tree.
//! Every branch caches, for each child, the number of bits and set bits below
//! it, so positional descent, rank and select all cost one root-to-leaf walk
//! plus a popcount scan inside a single block.

use crate::error::{Error, Result};

const WORD: usize = 64;
const LEAF_WORDS: usize = 64;
/// Maximum number of bits held by one block. A full block splits in half.
pub const LEAF_BITS: usize = LEAF_WORDS * WORD;
const MAX_CHILDREN: usize = 32;
/// Smallest transfer worth making from a full block to a neighbour.
const MIN_SHED_WORDS: usize = 4;

// Fill factors used when building from a flat bit string.
const BULK_LEAF_WORDS: usize = LEAF_WORDS * 3 / 4;
const BULK_CHILDREN: usize = MAX_CHILDREN * 3 / 4;

#[derive(Clone, Debug)]
pub struct DynamicBitVector {
    root: Node,
    len: usize,
    ones: usize,
}

#[derive(Clone, Debug)]
enum Node {
    Leaf(Leaf),
    Branch(Branch),
}

#[derive(Clone, Debug, Default)]
struct Leaf {
    words: Vec<u64>,
    len: usize,
    ones: usize,
}

#[derive(Clone, Debug, Default)]
struct Branch {
    children: Vec<Node>,
    lens: Vec<usize>,
    ones: Vec<usize>,
}

impl Default for DynamicBitVector {
    fn default() -> Self {
        Self::new()
    }
}

impl DynamicBitVector {
    pub fn new() -> Self {
        Self {
            root: Node::Leaf(Leaf::default()),
            len: 0,
            ones: 0,
        }
    }

    /// Builds a vector from `len` bits packed LSB-first into `words`.
    ///
    /// Bits of `words` beyond `len` are ignored.
    pub fn from_words(words: &[u64], len: usize) -> Result<Self> {
        if words.len() * WORD < len {
            return Err(Error::invalid(format!(
                "{} words cannot hold {len} bits",
                words.len()
            )));
        }
        let mut leaves = Vec::with_capacity(len / (BULK_LEAF_WORDS * WORD) + 1);
        let mut start = 0;
        while start < len {
            let take = (len - start).min(BULK_LEAF_WORDS * WORD);
            let first = start / WORD;
            let count = take.div_ceil(WORD);
            let mut chunk = Vec::with_capacity(count);
            chunk.extend_from_slice(&words[first..first + count]);
            let tail = take % WORD;
            if tail != 0 {
                *chunk.last_mut().unwrap() &= (1u64 << tail) - 1;
            }
            let ones = chunk.iter().map(|w| w.count_ones() as usize).sum();
            leaves.push(Node::Leaf(Leaf {
                words: chunk,
                len: take,
                ones,
            }));
            start += take;
        }
        if leaves.is_empty() {
            return Ok(Self::new());
        }

        let mut level = leaves;
        while level.len() > 1 {
            let mut parents = Vec::with_capacity(level.len() / BULK_CHILDREN + 1);
            let mut iter = level.into_iter().peekable();
            while iter.peek().is_some() {
                let mut branch = Branch::default();
                for node in iter.by_ref().take(BULK_CHILDREN) {
                    branch.lens.push(node.len());
                    branch.ones.push(node.ones());
                    branch.children.push(node);
                }
                parents.push(Node::Branch(branch));
            }
            level = parents;
        }
        let root = level.pop().unwrap();
        let ones = root.ones();
        Ok(Self { root, len, ones })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn count_ones(&self) -> usize {
        self.ones
    }

    pub fn count_zeros(&self) -> usize {
        self.len - self.ones
    }

    /// Inserts `bit` at `pos`, shifting every bit at or after `pos` up by one.
    pub fn insert(&mut self, pos: usize, bit: bool) -> Result<()> {
        if pos > self.len {
            return Err(Error::out_of_bounds(pos, self.len));
        }
        self.insert_rank(pos, bit);
        Ok(())
    }

    pub fn push(&mut self, bit: bool) {
        self.insert_rank(self.len, bit);
    }

    /// Inserts `bit` at `pos` and returns the number of bits equal to `bit`
    /// in the prefix `[0, pos)`, both in one descent. Requires `pos <= len`.
    pub(crate) fn insert_rank(&mut self, pos: usize, bit: bool) -> usize {
        debug_assert!(pos <= self.len);
        let (ones_before, split) = self.root.insert(pos, bit);
        if let Some(right) = split {
            let left = std::mem::replace(&mut self.root, Node::Leaf(Leaf::default()));
            self.root = Node::Branch(Branch {
                lens: vec![left.len(), right.len()],
                ones: vec![left.ones(), right.ones()],
                children: vec![left, right],
            });
        }
        self.len += 1;
        self.ones += bit as usize;
        if bit {
            ones_before
        } else {
            pos - ones_before
        }
    }

    pub fn get(&self, i: usize) -> Result<bool> {
        if i >= self.len {
            return Err(Error::out_of_bounds(i, self.len));
        }
        Ok(self.get_unchecked(i))
    }

    pub fn rank1(&self, i: usize) -> Result<usize> {
        if i > self.len {
            return Err(Error::out_of_bounds(i, self.len));
        }
        Ok(self.rank1_unchecked(i))
    }

    pub fn rank0(&self, i: usize) -> Result<usize> {
        Ok(i - self.rank1(i)?)
    }

    /// Position of the `j`-th (1-based) set bit.
    pub fn select1(&self, j: usize) -> Option<usize> {
        if j == 0 || j > self.ones {
            return None;
        }
        Some(self.root.select(j, true))
    }

    /// Position of the `j`-th (1-based) clear bit.
    pub fn select0(&self, j: usize) -> Option<usize> {
        if j == 0 || j > self.len - self.ones {
            return None;
        }
        Some(self.root.select(j, false))
    }

    pub(crate) fn get_unchecked(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.root.get(i)
    }

    pub(crate) fn rank1_unchecked(&self, i: usize) -> usize {
        debug_assert!(i <= self.len);
        if i == self.len {
            return self.ones;
        }
        self.root.rank1(i)
    }

    #[inline]
    pub(crate) fn rank_unchecked(&self, i: usize, bit: bool) -> usize {
        let ones = self.rank1_unchecked(i);
        if bit {
            ones
        } else {
            i - ones
        }
    }

    /// All bits packed LSB-first into `len.div_ceil(64)` words.
    pub fn to_words(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.len.div_ceil(WORD));
        let mut filled = 0usize;
        self.root.for_each_leaf(&mut |leaf| {
            append_bits(&mut out, &mut filled, &leaf.words, leaf.len);
        });
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        let words = self.to_words();
        (0..self.len).map(move |i| (words[i / WORD] >> (i % WORD)) & 1 == 1)
    }

    /// Heap bytes held by the block tree, payload included.
    pub fn heap_bytes(&self) -> usize {
        self.root.heap_bytes()
    }

    /// Number of blocks currently in the tree.
    pub fn leaf_count(&self) -> usize {
        let mut n = 0;
        self.root.for_each_leaf(&mut |_| n += 1);
        n
    }

    pub fn depth(&self) -> usize {
        let mut depth = 1;
        let mut node = &self.root;
        while let Node::Branch(b) = node {
            depth += 1;
            node = &b.children[0];
        }
        depth
    }
}

impl PartialEq for DynamicBitVector {
    fn eq(&self, other: &Self) -> bool {
        self.len == other.len && self.ones == other.ones && self.to_words() == other.to_words()
    }
}

impl Eq for DynamicBitVector {}

impl FromIterator<bool> for DynamicBitVector {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for bit in iter {
            if len % WORD == 0 {
                words.push(0);
            }
            if bit {
                words[len / WORD] |= 1 << (len % WORD);
            }
            len += 1;
        }
        Self::from_words(&words, len).expect("word count matches length")
    }
}

fn append_bits(out: &mut Vec<u64>, filled: &mut usize, words: &[u64], len: usize) {
    let shift = *filled % WORD;
    if shift == 0 {
        out.extend_from_slice(&words[..len.div_ceil(WORD)]);
    } else {
        for &w in &words[..len.div_ceil(WORD)] {
            *out.last_mut().unwrap() |= w << shift;
            out.push(w >> (WORD - shift));
        }
    }
    *filled += len;
    out.truncate(filled.div_ceil(WORD));
}

/// Position of the `k`-th (1-based) set bit of `word`.
#[inline]
fn select_in_word(mut word: u64, k: u32) -> usize {
    debug_assert!(k >= 1 && k <= word.count_ones());
    for _ in 1..k {
        word &= word - 1;
    }
    word.trailing_zeros() as usize
}

impl Node {
    fn len(&self) -> usize {
        match self {
            Node::Leaf(l) => l.len,
            Node::Branch(b) => b.lens.iter().sum(),
        }
    }

    fn ones(&self) -> usize {
        match self {
            Node::Leaf(l) => l.ones,
            Node::Branch(b) => b.ones.iter().sum(),
        }
    }

    /// Returns the set-bit count before `pos` and a new right sibling if
    /// this node overflowed.
    fn insert(&mut self, pos: usize, bit: bool) -> (usize, Option<Node>) {
        match self {
            Node::Leaf(leaf) => {
                if leaf.len < LEAF_BITS {
                    let rank = leaf.rank1(pos);
                    leaf.insert(pos, bit);
                    return (rank, None);
                }
                let mut right = leaf.split();
                let rank = if pos <= leaf.len {
                    let r = leaf.rank1(pos);
                    leaf.insert(pos, bit);
                    r
                } else {
                    let local = pos - leaf.len;
                    let r = leaf.ones + right.rank1(local);
                    right.insert(local, bit);
                    r
                };
                (rank, Some(Node::Leaf(right)))
            }
            Node::Branch(branch) => {
                let (mut c, mut local, mut acc) = branch.locate(pos);
                if branch.lens[c] == LEAF_BITS && branch.shed(c) {
                    (c, local, acc) = branch.locate(pos);
                }
                let (rank, split) = branch.children[c].insert(local, bit);
                branch.lens[c] += 1;
                branch.ones[c] += bit as usize;
                if let Some(sibling) = split {
                    let (slen, sones) = (sibling.len(), sibling.ones());
                    branch.lens[c] -= slen;
                    branch.ones[c] -= sones;
                    branch.children.insert(c + 1, sibling);
                    branch.lens.insert(c + 1, slen);
                    branch.ones.insert(c + 1, sones);
                }
                let split = (branch.children.len() > MAX_CHILDREN).then(|| {
                    let mid = branch.children.len() / 2;
                    Node::Branch(Branch {
                        children: branch.children.split_off(mid),
                        lens: branch.lens.split_off(mid),
                        ones: branch.ones.split_off(mid),
                    })
                });
                (acc + rank, split)
            }
        }
    }

    fn get(&self, mut i: usize) -> bool {
        let mut node = self;
        loop {
            match node {
                Node::Leaf(leaf) => return (leaf.words[i / WORD] >> (i % WORD)) & 1 == 1,
                Node::Branch(b) => {
                    let mut c = 0;
                    while i >= b.lens[c] {
                        i -= b.lens[c];
                        c += 1;
                    }
                    node = &b.children[c];
                }
            }
        }
    }

    fn rank1(&self, mut i: usize) -> usize {
        let mut node = self;
        let mut acc = 0;
        loop {
            match node {
                Node::Leaf(leaf) => return acc + leaf.rank1(i),
                Node::Branch(b) => {
                    let last = b.children.len() - 1;
                    let mut c = 0;
                    while c < last && i > b.lens[c] {
                        i -= b.lens[c];
                        acc += b.ones[c];
                        c += 1;
                    }
                    node = &b.children[c];
                }
            }
        }
    }

    fn select(&self, mut j: usize, bit: bool) -> usize {
        let mut node = self;
        let mut pos = 0;
        loop {
            match node {
                Node::Leaf(leaf) => return pos + leaf.select(j, bit),
                Node::Branch(b) => {
                    let mut c = 0;
                    loop {
                        let count = if bit { b.ones[c] } else { b.lens[c] - b.ones[c] };
                        if j <= count {
                            break;
                        }
                        j -= count;
                        pos += b.lens[c];
                        c += 1;
                    }
                    node = &b.children[c];
                }
            }
        }
    }

    fn for_each_leaf<F: FnMut(&Leaf)>(&self, f: &mut F) {
        match self {
            Node::Leaf(l) => f(l),
            Node::Branch(b) => b.children.iter().for_each(|c| c.for_each_leaf(f)),
        }
    }

    fn heap_bytes(&self) -> usize {
        use std::mem::size_of;
        match self {
            Node::Leaf(l) => l.words.capacity() * size_of::<u64>(),
            Node::Branch(b) => {
                b.children.capacity() * size_of::<Node>()
                    + (b.lens.capacity() + b.ones.capacity()) * size_of::<usize>()
                    + b.children.iter().map(Node::heap_bytes).sum::<usize>()
            }
        }
    }
}

impl Branch {
    /// Child receiving an insert at `pos`, the offset inside it, and the set
    /// bits before it.
    fn locate(&self, mut pos: usize) -> (usize, usize, usize) {
        let last = self.children.len() - 1;
        let mut acc = 0;
        let mut c = 0;
        while c < last && pos > self.lens[c] {
            pos -= self.lens[c];
            acc += self.ones[c];
            c += 1;
        }
        (c, pos, acc)
    }

    /// Moves whole words from the full leaf `c` into an adjacent leaf with
    /// room, which keeps blocks fuller than splitting alone. Returns false
    /// when neither neighbour can take at least [`MIN_SHED_WORDS`].
    fn shed(&mut self, c: usize) -> bool {
        let room = |b: &Branch, s: usize| match &b.children[s] {
            Node::Leaf(l) => (LEAF_BITS - l.len) / 2 / WORD,
            Node::Branch(_) => 0,
        };
        let right = if c + 1 < self.children.len() { room(self, c + 1) } else { 0 };
        let left = if c > 0 { room(self, c - 1) } else { 0 };
        if right.max(left) < MIN_SHED_WORDS {
            return false;
        }
        let (k, dst) = if right >= left { (right, c + 1) } else { (left, c - 1) };
        let (lo, hi) = self.children.split_at_mut(c.max(dst));
        let (full, other) = if dst > c { (&mut lo[c], &mut hi[0]) } else { (&mut hi[0], &mut lo[dst]) };
        let (Node::Leaf(full), Node::Leaf(other)) = (full, other) else {
            unreachable!("room is only reported for leaves");
        };
        let keep = LEAF_WORDS - k;
        let moved: Vec<u64> = if dst > c {
            full.words.drain(keep..).collect()
        } else {
            full.words.drain(..k).collect()
        };
        full.words.shrink_to_fit();
        let ones: usize = moved.iter().map(|w| w.count_ones() as usize).sum();
        full.len -= k * WORD;
        full.ones -= ones;
        if dst > c {
            other.words.reserve_exact(k);
            other.words.splice(0..0, moved);
        } else {
            other.words.reserve_exact(k + 1);
            let mut filled = other.len;
            append_bits(&mut other.words, &mut filled, &moved, k * WORD);
        }
        other.len += k * WORD;
        other.ones += ones;
        self.lens[c] -= k * WORD;
        self.ones[c] -= ones;
        self.lens[dst] += k * WORD;
        self.ones[dst] += ones;
        true
    }
}

impl Leaf {
    fn rank1(&self, i: usize) -> usize {
        let full = i / WORD;
        let mut count: usize = self.words[..full]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum();
        let rem = i % WORD;
        if rem != 0 {
            count += (self.words[full] & ((1u64 << rem) - 1)).count_ones() as usize;
        }
        count
    }

    fn insert(&mut self, pos: usize, bit: bool) {
        debug_assert!(pos <= self.len && self.len < LEAF_BITS);
        if self.len.is_multiple_of(WORD) {
            self.words.reserve_exact(1);
            self.words.push(0);
        }
        let wi = pos / WORD;
        let off = pos % WORD;
        for w in (wi + 1..self.words.len()).rev() {
            self.words[w] = (self.words[w] << 1) | (self.words[w - 1] >> (WORD - 1));
        }
        let word = self.words[wi];
        let low_mask = (1u64 << off) - 1;
        self.words[wi] = (word & low_mask) | ((word & !low_mask) << 1) | ((bit as u64) << off);
        self.len += 1;
        self.ones += bit as usize;
    }

    /// Moves the upper half (word aligned) into a new leaf.
    fn split(&mut self) -> Leaf {
        let keep_words = self.words.len() / 2;
        let words = self.words.split_off(keep_words);
        self.words.shrink_to_fit();
        let right_len = self.len - keep_words * WORD;
        let right_ones = words.iter().map(|w| w.count_ones() as usize).sum();
        self.len = keep_words * WORD;
        self.ones -= right_ones;
        Leaf {
            words,
            len: right_len,
            ones: right_ones,
        }
    }

    fn select(&self, mut j: usize, bit: bool) -> usize {
        for (wi, &w) in self.words.iter().enumerate() {
            let w = if bit { w } else { !w };
            let c = w.count_ones() as usize;
            if j <= c {
                return wi * WORD + select_in_word(w, j as u32);
            }
            j -= c;
        }
        unreachable!("select past the end of a block");
    }
}
