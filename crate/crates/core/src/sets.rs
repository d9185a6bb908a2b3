//! Exact integer-set primitives used for audiences, chambers and echo chambers.
//!
//! Sets are stored as strictly increasing `u32` arrays. Intersections use a
//! linear merge when the two operands have comparable sizes and galloping
//! (exponential) search when one is much smaller. [`Bitmap`] is the dense
//! alternative used when many sets over the same small universe are compared
//! pairwise.

use serde::{Deserialize, Serialize};

/// Size ratio above which intersection switches from merge to galloping.
const GALLOP_RATIO: usize = 32;

/// A strictly increasing list of ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IdSet(Vec<u32>);

impl IdSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set from arbitrary ids, sorting and deduplicating.
    pub fn from_unsorted(mut ids: Vec<u32>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        IdSet(ids)
    }

    /// Wraps an already strictly increasing vector.
    ///
    /// Debug builds verify the ordering.
    pub fn from_sorted(ids: Vec<u32>) -> Self {
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]), "ids not strictly increasing");
        IdSet(ids)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u32> {
        self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, id: u32) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn intersection_len(&self, other: &IdSet) -> usize {
        intersection_len(&self.0, &other.0)
    }

    pub fn union_len(&self, other: &IdSet) -> usize {
        self.len() + other.len() - self.intersection_len(other)
    }

    pub fn intersection(&self, other: &IdSet) -> IdSet {
        let (small, large) = order_by_len(&self.0, &other.0);
        let mut out = Vec::with_capacity(small.len());
        let mut lo = 0;
        for &x in small {
            match gallop(&large[lo..], x) {
                Ok(pos) => {
                    out.push(x);
                    lo += pos + 1;
                }
                Err(pos) => lo += pos,
            }
            if lo >= large.len() {
                break;
            }
        }
        IdSet(out)
    }

    pub fn union(&self, other: &IdSet) -> IdSet {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        IdSet(out)
    }

    /// Elements of `self` not in `other`.
    pub fn difference(&self, other: &IdSet) -> IdSet {
        IdSet(self.0.iter().copied().filter(|&x| !other.contains(x)).collect())
    }

    /// Union of many sets by k-way collection and a single sort.
    pub fn union_all<'a>(sets: impl IntoIterator<Item = &'a IdSet>) -> IdSet {
        let mut all = Vec::new();
        for s in sets {
            all.extend_from_slice(&s.0);
        }
        IdSet::from_unsorted(all)
    }
}

impl FromIterator<u32> for IdSet {
    fn from_iter<I: IntoIterator<Item = u32>>(iter: I) -> Self {
        IdSet::from_unsorted(iter.into_iter().collect())
    }
}

fn order_by_len<'a>(a: &'a [u32], b: &'a [u32]) -> (&'a [u32], &'a [u32]) {
    if a.len() <= b.len() {
        (a, b)
    } else {
        (b, a)
    }
}

/// Exponential search for `x` in sorted `xs`; same contract as `binary_search`.
fn gallop(xs: &[u32], x: u32) -> std::result::Result<usize, usize> {
    let mut bound = 1;
    while bound < xs.len() && xs[bound] < x {
        bound *= 2;
    }
    let lo = bound / 2;
    let hi = (bound + 1).min(xs.len());
    match xs[lo..hi].binary_search(&x) {
        Ok(p) => Ok(lo + p),
        Err(p) => Err(lo + p),
    }
}

/// Size of the intersection of two strictly increasing slices.
pub fn intersection_len(a: &[u32], b: &[u32]) -> usize {
    let (small, large) = order_by_len(a, b);
    if small.is_empty() {
        return 0;
    }
    if large.len() / small.len() >= GALLOP_RATIO {
        let mut count = 0;
        let mut lo = 0;
        for &x in small {
            if lo >= large.len() {
                break;
            }
            match gallop(&large[lo..], x) {
                Ok(pos) => {
                    count += 1;
                    lo += pos + 1;
                }
                Err(pos) => lo += pos,
            }
        }
        count
    } else {
        let (mut i, mut j, mut count) = (0, 0, 0);
        while i < small.len() && j < large.len() {
            let (x, y) = (small[i], large[j]);
            count += usize::from(x == y);
            i += usize::from(x <= y);
            j += usize::from(y <= x);
        }
        count
    }
}

/// Jaccard similarity `|A ∩ B| / |A ∪ B|`; `None` when both sets are empty.
pub fn jaccard(a: &IdSet, b: &IdSet) -> Option<f64> {
    jaccard_from_counts(a.len(), b.len(), a.intersection_len(b))
}

pub(crate) fn jaccard_from_counts(a: usize, b: usize, common: usize) -> Option<f64> {
    let union = a + b - common;
    (union > 0).then(|| common as f64 / union as f64)
}

/// Fixed-universe bitset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    words: Vec<u64>,
    len: usize,
}

impl Bitmap {
    pub fn with_universe(universe: usize) -> Self {
        Bitmap {
            words: vec![0; universe.div_ceil(64)],
            len: 0,
        }
    }

    pub fn from_ids(ids: &[u32], universe: usize) -> Self {
        let mut bm = Bitmap::with_universe(universe);
        for &id in ids {
            bm.insert(id);
        }
        bm
    }

    pub fn insert(&mut self, id: u32) -> bool {
        let (w, b) = (id as usize / 64, id % 64);
        let mask = 1u64 << b;
        let fresh = self.words[w] & mask == 0;
        self.words[w] |= mask;
        self.len += usize::from(fresh);
        fresh
    }

    pub fn contains(&self, id: u32) -> bool {
        let w = id as usize / 64;
        w < self.words.len() && self.words[w] & (1u64 << (id % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn intersection_len(&self, other: &Bitmap) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }
}

/// Either representation, chosen by density against a known universe.
#[derive(Debug, Clone)]
pub enum PackedSet {
    Sorted(IdSet),
    Dense(Bitmap),
}

impl PackedSet {
    /// Uses a bitmap when the set occupies at least 1/`DENSE_DIVISOR` of the
    /// universe (the popcount scan then costs no more than a merge).
    pub fn pack(set: &IdSet, universe: usize) -> Self {
        const DENSE_DIVISOR: usize = 32;
        if set.len() * DENSE_DIVISOR >= universe && universe > 0 {
            PackedSet::Dense(Bitmap::from_ids(set.as_slice(), universe))
        } else {
            PackedSet::Sorted(set.clone())
        }
    }

    pub fn len(&self) -> usize {
        match self {
            PackedSet::Sorted(s) => s.len(),
            PackedSet::Dense(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn intersection_len(&self, other: &PackedSet) -> usize {
        match (self, other) {
            (PackedSet::Sorted(a), PackedSet::Sorted(b)) => a.intersection_len(b),
            (PackedSet::Dense(a), PackedSet::Dense(b)) => a.intersection_len(b),
            (PackedSet::Sorted(s), PackedSet::Dense(d)) | (PackedSet::Dense(d), PackedSet::Sorted(s)) => {
                s.iter().filter(|&x| d.contains(x)).count()
            }
        }
    }

    pub fn jaccard(&self, other: &PackedSet) -> Option<f64> {
        jaccard_from_counts(self.len(), other.len(), self.intersection_len(other))
    }
}
