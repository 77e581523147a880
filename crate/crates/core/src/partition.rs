//! Set partitions of a ground set `{0, .., k-1}`.
//!
//! Blocks are stored as `u64` bitmasks, so the ground set is limited to 64
//! elements. The canonical form orders blocks by their smallest element,
//! which makes equality and hashing linear in the number of blocks.
//!
//! The Rust API is 0-based. The text form `{1,3|2}` used in trace files and
//! debug output is 1-based.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest ground set a [`Partition`] can hold.
pub const MAX_K: usize = 64;

/// Largest `k` accepted by [`enumerate_all`]; `Bell(12) = 4_213_597`.
pub const MAX_ENUMERATE_K: usize = 12;

/// A set partition in canonical form.
///
/// A partition produced by [`Partition::restriction`] lives on a ground set
/// with one index removed; indices are never renumbered.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Partition {
    k: usize,
    ground: u64,
    blocks: Vec<u64>,
}

#[inline]
pub(crate) fn full_mask(k: usize) -> u64 {
    if k == 64 {
        u64::MAX
    } else {
        (1u64 << k) - 1
    }
}

/// Iterates over the set bits of a mask in increasing order.
#[inline]
pub fn mask_indices(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}

/// Builds a mask from 0-based indices.
pub fn mask_of(indices: &[usize]) -> u64 {
    indices.iter().fold(0u64, |m, &i| m | (1u64 << i))
}

fn canonical_sort(blocks: &mut [u64]) {
    blocks.sort_unstable_by_key(|b| b.trailing_zeros());
}

impl Partition {
    /// Builds a partition of `{0, .., k-1}` from blocks of 0-based indices.
    pub fn new(k: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if k == 0 || k > MAX_K {
            return Err(Error::InvalidPartition(format!("ground set size {k} not in 1..={MAX_K}")));
        }
        let mut masks = Vec::with_capacity(blocks.len());
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            let mut m = 0u64;
            for &i in block {
                if i >= k {
                    return Err(Error::IndexOutOfRange { index: i, k });
                }
                if m & (1 << i) != 0 {
                    return Err(Error::InvalidPartition(format!("index {i} repeated in a block")));
                }
                m |= 1 << i;
            }
            masks.push(m);
        }
        Self::from_masks(k, masks)
    }

    /// Builds a partition of `{0, .., k-1}` from block bitmasks.
    pub fn from_masks(k: usize, masks: Vec<u64>) -> Result<Self> {
        if k == 0 || k > MAX_K {
            return Err(Error::InvalidPartition(format!("ground set size {k} not in 1..={MAX_K}")));
        }
        Self::with_ground(k, full_mask(k), masks)
    }

    fn with_ground(k: usize, ground: u64, mut masks: Vec<u64>) -> Result<Self> {
        let mut seen = 0u64;
        for &m in &masks {
            if m == 0 {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            if m & seen != 0 {
                return Err(Error::InvalidPartition("blocks are not disjoint".into()));
            }
            seen |= m;
        }
        if seen != ground {
            return Err(Error::InvalidPartition("blocks do not cover the ground set".into()));
        }
        canonical_sort(&mut masks);
        Ok(Self { k, ground, blocks: masks })
    }

    /// Skips validation; `masks` must be a partition of `{0, .., k-1}`.
    pub(crate) fn from_masks_unchecked(k: usize, mut masks: Vec<u64>) -> Self {
        canonical_sort(&mut masks);
        debug_assert_eq!(masks.iter().fold(0, |a, b| a | b), full_mask(k));
        Self { k, ground: full_mask(k), blocks: masks }
    }

    /// All indices in separate blocks.
    pub fn singletons(k: usize) -> Self {
        Self::from_masks_unchecked(k, (0..k).map(|i| 1u64 << i).collect())
    }

    /// All indices in one block.
    pub fn one_block(k: usize) -> Self {
        Self::from_masks_unchecked(k, vec![full_mask(k)])
    }

    /// Size of the original index range `{0, .., k-1}`.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Mask of the indices this partition covers.
    pub fn ground(&self) -> u64 {
        self.ground
    }

    /// Number of blocks `|tau|`.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block bitmasks in canonical order.
    pub fn masks(&self) -> &[u64] {
        &self.blocks
    }

    /// Blocks as sorted 0-based index lists.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        self.blocks.iter().map(|&m| mask_indices(m).collect()).collect()
    }

    /// Position of the block containing `i`, if `i` is in the ground set.
    pub fn block_of(&self, i: usize) -> Option<usize> {
        if i >= self.k {
            return None;
        }
        self.blocks.iter().position(|&b| b & (1 << i) != 0)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.k || self.ground & (1 << i) == 0 {
            Err(Error::IndexOutOfRange { index: i, k: self.k })
        } else {
            Ok(())
        }
    }

    /// Drops `i` from its block and removes the block if it becomes empty.
    pub fn restriction(&self, i: usize) -> Result<Partition> {
        self.check_index(i)?;
        let bit = 1u64 << i;
        let mut blocks: Vec<u64> = self
            .blocks
            .iter()
            .map(|&b| b & !bit)
            .filter(|&b| b != 0)
            .collect();
        canonical_sort(&mut blocks);
        Ok(Partition { k: self.k, ground: self.ground & !bit, blocks })
    }

    /// Every partition that agrees with `self` once `i` is removed.
    ///
    /// The current partition comes first, followed by `i` joined to each
    /// other block of the restriction in canonical order, and finally `i` as
    /// a new singleton when it is not one already.
    pub fn gibbs_neighborhood(&self, i: usize) -> Result<Vec<Partition>> {
        self.check_index(i)?;
        let bit = 1u64 << i;
        let own = self.blocks.iter().position(|&b| b & bit != 0).expect("index covered");
        let rest = self.blocks[own] & !bit;
        let mut out = Vec::with_capacity(self.len() + 1);
        out.push(self.clone());
        for (j, &b) in self.blocks.iter().enumerate() {
            if j == own {
                continue;
            }
            let mut masks = self.blocks.clone();
            masks[j] = b | bit;
            if rest == 0 {
                masks.remove(own);
            } else {
                masks[own] = rest;
            }
            canonical_sort(&mut masks);
            out.push(Partition { k: self.k, ground: self.ground, blocks: masks });
        }
        if rest != 0 {
            let mut masks = self.blocks.clone();
            masks[own] = rest;
            masks.push(bit);
            canonical_sort(&mut masks);
            out.push(Partition { k: self.k, ground: self.ground, blocks: masks });
        }
        Ok(out)
    }

    /// Parses the 1-based text form for a partition of `{1, .., k}`.
    pub fn parse_with_k(s: &str, k: usize) -> Result<Self> {
        let p: Partition = s.parse()?;
        if p.k != k {
            if p.k > k {
                return Err(Error::Parse(format!("partition {s} mentions index beyond k = {k}")));
            }
            return Err(Error::Parse(format!("partition {s} does not cover 1..={k}")));
        }
        Ok(p)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (j, &b) in self.blocks.iter().enumerate() {
            if j > 0 {
                f.write_str("|")?;
            }
            for (n, i) in mask_indices(b).enumerate() {
                if n > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{}", i + 1)?;
            }
        }
        f.write_str("}")
    }
}

impl FromStr for Partition {
    type Err = Error;

    /// Parses `{1,3|2}`; the ground set size is the largest index present.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix('{')
            .and_then(|t| t.strip_suffix('}'))
            .ok_or_else(|| Error::Parse(format!("partition must be wrapped in braces: {s:?}")))?;
        let mut blocks = Vec::new();
        let mut k = 0;
        for part in inner.split('|') {
            let mut block = Vec::new();
            for tok in part.split(',') {
                let v: usize = tok
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad index {tok:?} in {s:?}")))?;
                if v == 0 || v > MAX_K {
                    return Err(Error::Parse(format!("index {v} out of range in {s:?}")));
                }
                k = k.max(v);
                block.push(v - 1);
            }
            blocks.push(block);
        }
        Partition::new(k, blocks)
    }
}

/// All partitions of `{0, .., k-1}` in lexicographic order of their
/// restricted growth strings. The result has `Bell(k)` entries.
pub fn enumerate_all(k: usize) -> Result<Vec<Partition>> {
    if k == 0 || k > MAX_ENUMERATE_K {
        return Err(Error::EnumerationBound { k, max: MAX_ENUMERATE_K });
    }
    let mut out = Vec::new();
    // restricted growth string a[0] = 0, a[i] <= 1 + max(a[..i])
    let mut rgs = vec![0usize; k];
    let mut maxes = vec![0usize; k];
    loop {
        let n_blocks = maxes[k - 1] + 1;
        let mut masks = vec![0u64; n_blocks];
        for (i, &a) in rgs.iter().enumerate() {
            masks[a] |= 1 << i;
        }
        out.push(Partition { k, ground: full_mask(k), blocks: masks });

        // next string: bump the rightmost position that can grow
        let mut i = k - 1;
        loop {
            if i == 0 {
                return Ok(out);
            }
            if rgs[i] <= maxes[i - 1] {
                rgs[i] += 1;
                maxes[i] = maxes[i - 1].max(rgs[i]);
                for j in i + 1..k {
                    rgs[j] = 0;
                    maxes[j] = maxes[i];
                }
                break;
            }
            i -= 1;
        }
    }
}
