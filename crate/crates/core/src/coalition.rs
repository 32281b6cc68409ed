//! Coalitions of features and the synthetic inputs they induce.
//!
//! A coalition is the set of features that take their *target* value; every
//! other feature takes its *baseline* value. Coalitions are stored as bit
//! masks, so the feature count is limited to [`MAX_FEATURES`].

use std::cmp::Ordering;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest feature count a [`Coalition`] can represent.
pub const MAX_FEATURES: usize = 64;

/// Default cap on `p` for anything that enumerates all `2^p` coalitions.
pub const ENUMERATION_CAP: usize = 20;

/// Binary inclusion vector over `dim` features.
///
/// Ordering is by size first and then lexicographic on the sorted index list,
/// so `{0} < {1} < {0,1} < {0,2} < {1,2}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coalition {
    bits: u64,
    dim: u8,
}

impl Coalition {
    pub fn empty(dim: usize) -> Self {
        assert!(dim <= MAX_FEATURES, "at most {MAX_FEATURES} features");
        Coalition { bits: 0, dim: dim as u8 }
    }

    pub fn full(dim: usize) -> Self {
        let mut c = Self::empty(dim);
        c.bits = full_mask(dim);
        c
    }

    /// Builds a coalition from a raw mask; bit `i` set means feature `i` is in.
    pub fn from_mask(dim: usize, bits: u64) -> Result<Self> {
        if dim > MAX_FEATURES {
            return Err(Error::Resource(format!("{dim} features exceed the coalition limit of {MAX_FEATURES}")));
        }
        if bits & !full_mask(dim) != 0 {
            return Err(Error::input(format!("mask {bits:#b} has bits beyond {dim} features")));
        }
        Ok(Coalition { bits, dim: dim as u8 })
    }

    /// Builds a coalition from zero-based feature indices.
    pub fn from_indices(dim: usize, indices: &[usize]) -> Result<Self> {
        let mut bits = 0u64;
        for &i in indices {
            if i >= dim {
                return Err(Error::input(format!("feature index {i} out of range for {dim} features")));
            }
            bits |= 1 << i;
        }
        Self::from_mask(dim, bits)
    }

    /// Builds a coalition from a 0/1 vector.
    pub fn from_bits(z: &[u8]) -> Result<Self> {
        let mut bits = 0u64;
        for (i, &v) in z.iter().enumerate() {
            match v {
                0 => {}
                1 => bits |= 1 << i,
                other => return Err(Error::input(format!("coalition entries must be 0 or 1, got {other}"))),
            }
        }
        Self::from_mask(z.len(), bits)
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn mask(&self) -> u64 {
        self.bits
    }

    pub fn size(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn is_full(&self) -> bool {
        self.bits == full_mask(self.dim())
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.dim() && self.bits & (1 << i) != 0
    }

    pub fn with(&self, i: usize) -> Self {
        debug_assert!(i < self.dim());
        Coalition { bits: self.bits | (1 << i), dim: self.dim }
    }

    pub fn without(&self, i: usize) -> Self {
        Coalition { bits: self.bits & !(1 << i), dim: self.dim }
    }

    pub fn complement(&self) -> Self {
        Coalition { bits: !self.bits & full_mask(self.dim()), dim: self.dim }
    }

    pub fn is_subset_of(&self, other: &Coalition) -> bool {
        self.bits & !other.bits == 0
    }

    /// Zero-based indices of the included features, ascending.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).filter(move |&i| self.bits & (1 << i) != 0)
    }

    /// One-based feature labels, the form used in serialized output.
    pub fn labels(&self) -> Vec<usize> {
        self.indices().map(|i| i + 1).collect()
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.dim()).map(|i| u8::from(self.contains(i))).collect()
    }

    /// All subsets of this coalition (including the empty set and itself),
    /// in size-then-lexicographic order.
    pub fn subsets(&self) -> Vec<Coalition> {
        let mut out = Vec::with_capacity(1 << self.size());
        let mut sub = self.bits;
        loop {
            out.push(Coalition { bits: sub, dim: self.dim });
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & self.bits;
        }
        out.sort();
        out
    }
}

impl Ord for Coalition {
    fn cmp(&self, other: &Self) -> Ordering {
        self.size()
            .cmp(&other.size())
            .then_with(|| self.indices().cmp(other.indices()))
            .then_with(|| self.dim.cmp(&other.dim))
    }
}

impl PartialOrd for Coalition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Coalition {
    /// One-based set notation, e.g. `{2,3}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.indices().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        f.write_str("}")
    }
}

/// Serialized as the sorted list of one-based feature labels plus the
/// feature count.
#[derive(Serialize, Deserialize)]
struct CoalitionRepr {
    features: Vec<usize>,
    p: usize,
}

impl Serialize for Coalition {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        CoalitionRepr { features: self.labels(), p: self.dim() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Coalition {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = CoalitionRepr::deserialize(deserializer)?;
        let zero_based: Vec<usize> = repr
            .features
            .iter()
            .map(|&l| l.checked_sub(1).ok_or_else(|| serde::de::Error::custom("feature labels start at 1")))
            .collect::<std::result::Result<_, _>>()?;
        Coalition::from_indices(repr.p, &zero_based).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn full_mask(dim: usize) -> u64 {
    if dim >= 64 {
        u64::MAX
    } else {
        (1u64 << dim) - 1
    }
}

pub(crate) fn check_enumerable(p: usize, cap: usize) -> Result<()> {
    if p > cap {
        return Err(Error::Resource(format!("enumerating 2^{p} coalitions exceeds the cap of p = {cap}")));
    }
    Ok(())
}

/// All coalitions of exactly `size` features out of `p`, lexicographic.
pub fn coalitions_of_size(p: usize, size: usize) -> Vec<Coalition> {
    let mut out = Vec::new();
    if size > p {
        return out;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        let bits = idx.iter().fold(0u64, |acc, &i| acc | (1 << i));
        out.push(Coalition { bits, dim: p as u8 });
        // advance to the next combination
        let mut k = size;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if idx[k] < p - size + k {
                idx[k] += 1;
                for r in k + 1..size {
                    idx[r] = idx[r - 1] + 1;
                }
                break;
            }
        }
    }
}

/// All `2^p` coalitions in size-then-lexicographic order, from the empty
/// coalition to the full one.
pub fn all_coalitions(p: usize) -> Result<Vec<Coalition>> {
    check_enumerable(p, ENUMERATION_CAP)?;
    Ok((0..=p).flat_map(|s| coalitions_of_size(p, s)).collect())
}

/// Binomial coefficient as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

/// Shapley kernel weight `(p-1) / (C(p,s) s (p-s))` of a coalition of size `s`.
///
/// Undefined for the empty and the full coalition.
pub fn kernel_weight(p: usize, s: usize) -> Result<f64> {
    if p < 2 {
        return Err(Error::Domain(format!("kernel weight needs p >= 2, got {p}")));
    }
    if s == 0 || s >= p {
        return Err(Error::Domain(format!("kernel weight undefined for coalition size {s} with p = {p}")));
    }
    Ok((p - 1) as f64 / (binomial(p, s) * s as f64 * (p - s) as f64))
}

/// Shapley formula weight `s! (p-s-1)! / p!` attached to a marginal
/// contribution against a coalition of size `s`.
pub fn shapley_weight(p: usize, s: usize) -> f64 {
    debug_assert!(s < p);
    1.0 / (p as f64 * binomial(p - 1, s))
}

/// Synthetic inputs for a list of coalitions: row `i` is
/// `baseline * (1 - z_i) + target * z_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBatch {
    pub matrix: Array2<f64>,
    pub target: Vec<f64>,
    pub baseline: Vec<f64>,
}

pub fn synthesize(coalitions: &[Coalition], baseline: &[f64], target: &[f64]) -> Result<SyntheticBatch> {
    let p = target.len();
    if baseline.len() != p {
        return Err(Error::input(format!("baseline has length {} but target has length {p}", baseline.len())));
    }
    let mut matrix = Array2::zeros((coalitions.len(), p));
    for (r, z) in coalitions.iter().enumerate() {
        if z.dim() != p {
            return Err(Error::input(format!("coalition over {} features used with {p}-dimensional inputs", z.dim())));
        }
        for j in 0..p {
            matrix[[r, j]] = if z.contains(j) { target[j] } else { baseline[j] };
        }
    }
    Ok(SyntheticBatch { matrix, target: target.to_vec(), baseline: baseline.to_vec() })
}
