//! Multi-indices, finitely supported spectral vectors and index sets.
//!
//! A spectral vector stores rescaled Fourier coefficients: `V_k = c_k v̂_k`
//! for functions measured in `H^1` and `F_k = f̂_k / c_k` for data measured in
//! `H^{-1}`, where `c_k = sqrt(1 + |k|^2)`. With these scalings both norms are
//! plain Euclidean norms of the coefficient sequence.

use std::cmp::Ordering;
use std::collections::{btree_map, btree_set, BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Default modulus below which entries are dropped on construction.
pub const DEFAULT_DROP_THRESHOLD: f64 = 1e-300;

/// A frequency `k ∈ Z^d`.
///
/// Ordered by `|k|^2` first, then lexicographically on the components.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(SmallVec<[i64; 4]>);

impl MultiIndex {
    pub fn new(components: &[i64]) -> Self {
        assert!(!components.is_empty(), "multi-index needs at least one component");
        MultiIndex(SmallVec::from_slice(components))
    }

    pub fn zero(d: usize) -> Self {
        assert!(d >= 1, "dimension must be at least 1");
        MultiIndex(SmallVec::from_elem(0, d))
    }

    /// One-dimensional index.
    pub fn scalar(k: i64) -> Self {
        MultiIndex(SmallVec::from_slice(&[k]))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[i64] {
        &self.0
    }

    pub fn norm_sq(&self) -> i64 {
        self.0.iter().map(|&c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    /// `c_k = sqrt(1 + |k|^2)`.
    pub fn weight(&self) -> f64 {
        (1.0 + self.norm_sq() as f64).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn dot(&self, other: &MultiIndex) -> i64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex(self.0.iter().zip(other.0.iter()).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex(self.0.iter().zip(other.0.iter()).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> MultiIndex {
        MultiIndex(self.0.iter().map(|a| -a).collect())
    }

    /// All lattice points with Euclidean norm at most `radius`, in index order.
    pub fn ball(d: usize, radius: f64) -> Vec<MultiIndex> {
        assert!(d >= 1);
        if radius < 0.0 {
            return Vec::new();
        }
        let r = radius.floor() as i64;
        let r2 = radius * radius;
        let mut out = Vec::new();
        let mut cur = vec![-r; d];
        loop {
            let n2: i64 = cur.iter().map(|c| c * c).sum();
            if (n2 as f64) <= r2 + 1e-9 {
                out.push(MultiIndex::new(&cur));
            }
            let mut j = 0;
            loop {
                if j == d {
                    out.sort();
                    return out;
                }
                cur[j] += 1;
                if cur[j] > r {
                    cur[j] = -r;
                    j += 1;
                } else {
                    break;
                }
            }
        }
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.norm_sq()
            .cmp(&other.norm_sq())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl From<i64> for MultiIndex {
    fn from(k: i64) -> Self {
        MultiIndex::scalar(k)
    }
}

impl From<&[i64]> for MultiIndex {
    fn from(k: &[i64]) -> Self {
        MultiIndex::new(k)
    }
}

impl<const N: usize> From<[i64; N]> for MultiIndex {
    fn from(k: [i64; N]) -> Self {
        MultiIndex::new(&k)
    }
}

/// A finite set of frequencies, iterated in [`MultiIndex`] order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IndexSet(BTreeSet<MultiIndex>);

impl IndexSet {
    pub fn new() -> Self {
        IndexSet(BTreeSet::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, k: &MultiIndex) -> bool {
        self.0.contains(k)
    }

    pub fn insert(&mut self, k: MultiIndex) -> bool {
        self.0.insert(k)
    }

    pub fn remove(&mut self, k: &MultiIndex) -> bool {
        self.0.remove(k)
    }

    pub fn iter(&self) -> btree_set::Iter<'_, MultiIndex> {
        self.0.iter()
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        IndexSet(self.0.union(&other.0).cloned().collect())
    }

    pub fn intersection(&self, other: &IndexSet) -> IndexSet {
        IndexSet(self.0.intersection(&other.0).cloned().collect())
    }

    pub fn difference(&self, other: &IndexSet) -> IndexSet {
        IndexSet(self.0.difference(&other.0).cloned().collect())
    }

    pub fn extend_from(&mut self, other: &IndexSet) {
        self.0.extend(other.0.iter().cloned());
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_disjoint(&self, other: &IndexSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    /// Lattice ball `{k : |k| <= radius}`.
    pub fn ball(d: usize, radius: f64) -> IndexSet {
        MultiIndex::ball(d, radius).into_iter().collect()
    }
}

impl FromIterator<MultiIndex> for IndexSet {
    fn from_iter<T: IntoIterator<Item = MultiIndex>>(iter: T) -> Self {
        IndexSet(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a IndexSet {
    type Item = &'a MultiIndex;
    type IntoIter = btree_set::Iter<'a, MultiIndex>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Which rescaling the stored entries carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// `V_k = c_k v̂_k`.
    H1,
    /// `F_k = f̂_k / c_k`.
    HMinus1,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Normalization::H1 => write!(f, "H1"),
            Normalization::HMinus1 => write!(f, "Hminus1"),
        }
    }
}

impl FromStr for Normalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H1" => Ok(Normalization::H1),
            "Hminus1" => Ok(Normalization::HMinus1),
            other => Err(Error::Parse(format!("unknown normalization '{other}'"))),
        }
    }
}

/// Finitely supported coefficient sequence indexed by [`MultiIndex`].
///
/// Zero entries are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralVector {
    dim: usize,
    normalization: Normalization,
    entries: BTreeMap<MultiIndex, Complex64>,
}

impl SpectralVector {
    pub fn new(dim: usize, normalization: Normalization) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        SpectralVector { dim, normalization, entries: BTreeMap::new() }
    }

    /// Builds a vector, summing repeated indices and dropping entries with
    /// modulus at or below [`DEFAULT_DROP_THRESHOLD`].
    pub fn from_entries<I>(dim: usize, normalization: Normalization, entries: I) -> Self
    where
        I: IntoIterator<Item = (MultiIndex, Complex64)>,
    {
        Self::from_entries_with_threshold(dim, normalization, entries, DEFAULT_DROP_THRESHOLD)
    }

    pub fn from_entries_with_threshold<I>(
        dim: usize,
        normalization: Normalization,
        entries: I,
        threshold: f64,
    ) -> Self
    where
        I: IntoIterator<Item = (MultiIndex, Complex64)>,
    {
        let mut map: BTreeMap<MultiIndex, Complex64> = BTreeMap::new();
        for (k, v) in entries {
            assert_eq!(k.dim(), dim, "multi-index dimension mismatch");
            *map.entry(k).or_insert(Complex64::new(0.0, 0.0)) += v;
        }
        map.retain(|_, v| v.norm() > threshold);
        SpectralVector { dim, normalization, entries: map }
    }

    /// Real entries along a 1D frequency list.
    pub fn from_real_1d(normalization: Normalization, entries: &[(i64, f64)]) -> Self {
        Self::from_entries(
            1,
            normalization,
            entries.iter().map(|&(k, v)| (MultiIndex::scalar(k), Complex64::new(v, 0.0))),
        )
    }

    /// Rescales raw Fourier coefficients `v̂_k` into the given normalization.
    pub fn from_fourier<I>(dim: usize, normalization: Normalization, raw: I) -> Self
    where
        I: IntoIterator<Item = (MultiIndex, Complex64)>,
    {
        Self::from_entries(
            dim,
            normalization,
            raw.into_iter().map(|(k, v)| {
                let c = k.weight();
                let scaled = match normalization {
                    Normalization::H1 => v * c,
                    Normalization::HMinus1 => v / c,
                };
                (k, scaled)
            }),
        )
    }

    /// Raw Fourier coefficients `v̂_k`.
    pub fn to_fourier(&self) -> Vec<(MultiIndex, Complex64)> {
        self.entries
            .iter()
            .map(|(k, v)| {
                let c = k.weight();
                let raw = match self.normalization {
                    Normalization::H1 => v / c,
                    Normalization::HMinus1 => v * c,
                };
                (k.clone(), raw)
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, k: &MultiIndex) -> Complex64 {
        self.entries.get(k).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn iter(&self) -> btree_map::Iter<'_, MultiIndex, Complex64> {
        self.entries.iter()
    }

    pub fn support(&self) -> IndexSet {
        self.entries.keys().cloned().collect()
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.values().map(|v| v.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `P_Λ v`.
    pub fn project(&self, set: &IndexSet) -> SpectralVector {
        let entries = if set.len() < self.entries.len() {
            set.iter()
                .filter_map(|k| self.entries.get(k).map(|v| (k.clone(), *v)))
                .collect()
        } else {
            self.entries
                .iter()
                .filter(|(k, _)| set.contains(k))
                .map(|(k, v)| (k.clone(), *v))
                .collect()
        };
        SpectralVector { dim: self.dim, normalization: self.normalization, entries }
    }

    /// `v - P_Λ v`.
    pub fn project_complement(&self, set: &IndexSet) -> SpectralVector {
        let entries = self
            .entries
            .iter()
            .filter(|(k, _)| !set.contains(k))
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        SpectralVector { dim: self.dim, normalization: self.normalization, entries }
    }

    /// Entries sorted by decreasing modulus, ties broken by index order.
    pub fn rearrange(&self) -> Vec<(MultiIndex, f64)> {
        let mut out: Vec<(MultiIndex, f64)> =
            self.entries.iter().map(|(k, v)| (k.clone(), v.norm())).collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    pub fn scale(&self, c: Complex64) -> SpectralVector {
        SpectralVector::from_entries(
            self.dim,
            self.normalization,
            self.entries.iter().map(|(k, v)| (k.clone(), v * c)),
        )
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: Complex64, other: &SpectralVector) -> SpectralVector {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        assert_eq!(self.normalization, other.normalization, "normalization mismatch");
        let mut map = self.entries.clone();
        for (k, v) in &other.entries {
            *map.entry(k.clone()).or_insert(Complex64::new(0.0, 0.0)) += c * v;
        }
        map.retain(|_, v| v.norm() > DEFAULT_DROP_THRESHOLD);
        SpectralVector { dim: self.dim, normalization: self.normalization, entries: map }
    }

    pub fn add(&self, other: &SpectralVector) -> SpectralVector {
        self.axpy(Complex64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &SpectralVector) -> SpectralVector {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    /// Euclidean inner product `Σ conj(self_k) other_k`.
    pub fn inner(&self, other: &SpectralVector) -> Complex64 {
        let (small, large, conj_small) = if self.len() <= other.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, v) in &small.entries {
            if let Some(w) = large.entries.get(k) {
                acc += if conj_small { v.conj() * w } else { w.conj() * v };
            }
        }
        acc
    }

    /// Serializes to the line format `k_1 ... k_d re im` under a header.
    pub fn to_text(&self) -> String {
        let mut s = format!("d={} normalization={}\n", self.dim, self.normalization);
        for (k, v) in &self.entries {
            s.push_str(&format!("{} {:e} {:e}\n", k, v.re, v.im));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<SpectralVector> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse("empty spectral vector file".into()))?;
        let mut dim = None;
        let mut normalization = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("d", v)) => {
                    dim = Some(v.parse::<usize>().map_err(|_| {
                        Error::Parse(format!("line 1: invalid dimension '{v}'"))
                    })?)
                }
                Some(("normalization", v)) => normalization = Some(v.parse::<Normalization>()?),
                _ => return Err(Error::Parse(format!("line 1: unexpected header field '{field}'"))),
            }
        }
        let dim = dim.ok_or_else(|| Error::Parse("line 1: missing d=".into()))?;
        let normalization =
            normalization.ok_or_else(|| Error::Parse("line 1: missing normalization=".into()))?;
        if dim == 0 {
            return Err(Error::Parse("line 1: dimension must be at least 1".into()));
        }
        let mut entries = Vec::new();
        for (lineno, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != dim + 2 {
                return Err(Error::Parse(format!(
                    "line {lineno}: expected {} fields, found {}",
                    dim + 2,
                    fields.len()
                )));
            }
            let mut k = Vec::with_capacity(dim);
            for f in &fields[..dim] {
                k.push(f.parse::<i64>().map_err(|_| {
                    Error::Parse(format!("line {lineno}: invalid index component '{f}'"))
                })?);
            }
            let re: f64 = fields[dim]
                .parse()
                .map_err(|_| Error::Parse(format!("line {lineno}: invalid real part")))?;
            let im: f64 = fields[dim + 1]
                .parse()
                .map_err(|_| Error::Parse(format!("line {lineno}: invalid imaginary part")))?;
            entries.push((MultiIndex::new(&k), Complex64::new(re, im)));
        }
        Ok(SpectralVector::from_entries(dim, normalization, entries))
    }
}
