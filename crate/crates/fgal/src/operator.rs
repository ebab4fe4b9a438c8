//! The periodic operator `Lu = -∇·(ν∇u) + σu` in the rescaled Fourier basis.
//!
//! With `φ_k = (2π)^{-d/2} e^{ik·x}` and `c_k = sqrt(1 + |k|^2)` the stiffness
//! entries are
//!
//! ```text
//! a_{ℓ,k} = (2π)^{-d/2} [ (ℓ·k) ν̂_{ℓ-k} + σ̂_{ℓ-k} ] / (c_ℓ c_k)
//! ```
//!
//! so `A` maps `H^1`-normalized coefficient vectors to `H^{-1}`-normalized ones.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral_core::{IndexSet, MultiIndex, Normalization, SpectralVector};

/// Default number of grid points per coefficient degree used by [`coercivity_bounds`].
pub const DEFAULT_OVERSAMPLE: usize = 512;

/// Cap on the total number of grid points sampled by [`coercivity_bounds`].
const MAX_SAMPLES: usize = 1 << 22;

const HERMITIAN_TOL: f64 = 1e-14;

/// `(2π)^{-d/2}`.
pub fn basis_scale(d: usize) -> f64 {
    (2.0 * PI).powf(-(d as f64) / 2.0)
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Fourier coefficients of one coefficient function.
///
/// `tail_bound` is a certified bound on the sup-norm of the part of the
/// function not represented by `entries` (zero for trigonometric polynomials).
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSpectrum {
    dim: usize,
    entries: BTreeMap<MultiIndex, Complex64>,
    hermitian: bool,
    tail_bound: f64,
}

impl CoefficientSpectrum {
    pub fn new<I>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, Complex64)>,
    {
        if dim == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        let mut map = BTreeMap::new();
        for (k, v) in entries {
            if k.dim() != dim {
                return Err(Error::Domain(format!(
                    "coefficient index {k:?} does not have dimension {dim}"
                )));
            }
            *map.entry(k).or_insert(zero()) += v;
        }
        map.retain(|_, v: &mut Complex64| v.norm() > 0.0);
        let scale = map.values().map(|v| v.norm()).fold(0.0, f64::max);
        let hermitian = map.iter().all(|(k, v)| {
            let mirror = map.get(&k.neg()).copied().unwrap_or(zero());
            (mirror - v.conj()).norm() <= HERMITIAN_TOL * scale.max(1.0)
        });
        Ok(CoefficientSpectrum { dim, entries: map, hermitian, tail_bound: 0.0 })
    }

    /// The constant function `value`.
    pub fn constant(dim: usize, value: f64) -> Self {
        let c = Complex64::new(value / basis_scale(dim), 0.0);
        CoefficientSpectrum::new(dim, [(MultiIndex::zero(dim), c)]).expect("valid constant")
    }

    /// `c0 + Σ a cos(k·x) + Σ b sin(k·x)`.
    pub fn trig(
        dim: usize,
        c0: f64,
        cos_terms: &[(MultiIndex, f64)],
        sin_terms: &[(MultiIndex, f64)],
    ) -> Result<Self> {
        let s = 1.0 / basis_scale(dim);
        let mut entries = vec![(MultiIndex::zero(dim), Complex64::new(c0 * s, 0.0))];
        for (k, a) in cos_terms {
            entries.push((k.clone(), Complex64::new(0.5 * a * s, 0.0)));
            entries.push((k.neg(), Complex64::new(0.5 * a * s, 0.0)));
        }
        for (k, b) in sin_terms {
            entries.push((k.clone(), Complex64::new(0.0, -0.5 * b * s)));
            entries.push((k.neg(), Complex64::new(0.0, 0.5 * b * s)));
        }
        CoefficientSpectrum::new(dim, entries)
    }

    /// Coefficients of a periodic function by trapezoidal quadrature on `m^d` points,
    /// keeping modes with `|k|_∞ <= degree`.
    pub fn from_function<F>(dim: usize, degree: i64, m: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        let total = m.checked_pow(dim as u32).filter(|&t| t <= MAX_SAMPLES).ok_or_else(|| {
            Error::Domain(format!("quadrature grid {m}^{dim} is too large"))
        })?;
        let h = 2.0 * PI / m as f64;
        let mut samples = Vec::with_capacity(total);
        let mut x = vec![0.0; dim];
        for idx in 0..total {
            let mut r = idx;
            for xj in x.iter_mut() {
                *xj = (r % m) as f64 * h;
                r /= m;
            }
            samples.push((x.clone(), f(&x)));
        }
        let weight = (2.0 * PI).powf(dim as f64 / 2.0) / total as f64;
        let mut entries = Vec::new();
        let mut k = vec![-degree; dim];
        loop {
            let mut acc = zero();
            for (xs, val) in &samples {
                let phase: f64 = k.iter().zip(xs).map(|(a, b)| *a as f64 * b).sum();
                acc += Complex64::from_polar(*val, -phase);
            }
            entries.push((MultiIndex::new(&k), acc * weight));
            let mut j = 0;
            loop {
                if j == dim {
                    return CoefficientSpectrum::new(dim, entries);
                }
                k[j] += 1;
                if k[j] > degree {
                    k[j] = -degree;
                    j += 1;
                } else {
                    break;
                }
            }
        }
    }

    /// Interprets the entries of a spectral vector as raw Fourier coefficients.
    pub fn from_vector(v: &SpectralVector) -> Result<Self> {
        CoefficientSpectrum::new(v.dim(), v.iter().map(|(k, c)| (k.clone(), *c)))
    }

    pub fn to_vector(&self) -> SpectralVector {
        SpectralVector::from_entries(
            self.dim,
            Normalization::H1,
            self.entries.iter().map(|(k, v)| (k.clone(), *v)),
        )
    }

    pub fn with_tail_bound(mut self, bound: f64) -> Self {
        self.tail_bound = bound.max(0.0);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, h: &MultiIndex) -> Complex64 {
        self.entries.get(h).copied().unwrap_or(zero())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Largest Euclidean norm of a stored mode.
    pub fn radius(&self) -> f64 {
        self.entries.keys().map(|k| k.norm()).fold(0.0, f64::max)
    }

    /// Largest component magnitude of a stored mode.
    pub fn max_degree(&self) -> i64 {
        self.entries
            .keys()
            .flat_map(|k| k.components().iter().map(|c| c.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Keeps modes with `|h| <= radius`; the dropped modes are added to `tail_bound`.
    pub fn truncate(&self, radius: f64) -> CoefficientSpectrum {
        let s = basis_scale(self.dim);
        let mut dropped = 0.0;
        let mut kept = BTreeMap::new();
        for (k, v) in &self.entries {
            if k.norm() <= radius + 1e-12 {
                kept.insert(k.clone(), *v);
            } else {
                dropped += v.norm();
            }
        }
        CoefficientSpectrum {
            dim: self.dim,
            entries: kept,
            hermitian: self.hermitian,
            tail_bound: self.tail_bound + s * dropped,
        }
    }

    /// Sup-norm bound `(2π)^{-d/2} Σ|ĉ_k| + tail_bound`.
    pub fn sup_bound(&self) -> f64 {
        basis_scale(self.dim) * self.entries.values().map(|v| v.norm()).sum::<f64>()
            + self.tail_bound
    }

    /// Point value (real part) of the represented function.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let s = basis_scale(self.dim);
        s * self
            .entries
            .iter()
            .map(|(k, v)| {
                let phase: f64 = k.components().iter().zip(x).map(|(a, b)| *a as f64 * b).sum();
                v.re * phase.cos() - v.im * phase.sin()
            })
            .sum::<f64>()
    }

    /// `(2π)^{-d/2} Σ |k| |ĉ_k|`, a Lipschitz constant of the function.
    pub fn gradient_bound(&self) -> f64 {
        basis_scale(self.dim) * self.entries.iter().map(|(k, v)| k.norm() * v.norm()).sum::<f64>()
    }
}

/// How the coercivity constants of an operator were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundsProvenance {
    ExactSampled,
    UserSupplied,
    /// Copied from the operator a truncation was taken from.
    Inherited,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoercivityBounds {
    pub alpha_star: f64,
    pub alpha_upper: f64,
    pub provenance: BoundsProvenance,
}

#[derive(Clone, Debug)]
struct Offset {
    h: MultiIndex,
    nu: Complex64,
    sigma: Complex64,
}

/// The operator `L` given by the spectra of `ν` and `σ`.
#[derive(Clone, Debug)]
pub struct EllipticOperator {
    dim: usize,
    nu: CoefficientSpectrum,
    sigma: CoefficientSpectrum,
    bounds: CoercivityBounds,
    offsets: Vec<Offset>,
}

impl EllipticOperator {
    /// Builds the operator and samples its coercivity constants.
    pub fn new(nu: CoefficientSpectrum, sigma: CoefficientSpectrum) -> Result<Self> {
        Self::with_oversample(nu, sigma, DEFAULT_OVERSAMPLE)
    }

    pub fn with_oversample(
        nu: CoefficientSpectrum,
        sigma: CoefficientSpectrum,
        oversample: usize,
    ) -> Result<Self> {
        let mut op = Self::unchecked(nu, sigma)?;
        op.bounds = coercivity_bounds(&op, oversample)?;
        Ok(op)
    }

    /// Builds the operator with caller-provided `α_*`, `α^*`.
    pub fn with_bounds(
        nu: CoefficientSpectrum,
        sigma: CoefficientSpectrum,
        alpha_star: f64,
        alpha_upper: f64,
    ) -> Result<Self> {
        if !(alpha_star > 0.0 && alpha_star <= alpha_upper && alpha_upper.is_finite()) {
            return Err(Error::Domain(format!(
                "need 0 < α_* <= α^* < ∞, got α_* = {alpha_star}, α^* = {alpha_upper}"
            )));
        }
        let mut op = Self::unchecked(nu, sigma)?;
        op.bounds =
            CoercivityBounds { alpha_star, alpha_upper, provenance: BoundsProvenance::UserSupplied };
        Ok(op)
    }

    fn unchecked(nu: CoefficientSpectrum, sigma: CoefficientSpectrum) -> Result<Self> {
        if nu.dim() != sigma.dim() {
            return Err(Error::Domain("ν and σ have different dimensions".into()));
        }
        let dim = nu.dim();
        for (name, c) in [("ν", &nu), ("σ", &sigma)] {
            if !c.is_hermitian() {
                return Err(Error::Domain(format!("{name} is not real-valued (spectrum not Hermitian)")));
            }
            let c0 = c.get(&MultiIndex::zero(dim));
            if !(c0.re > 0.0) || c0.im.abs() > HERMITIAN_TOL * c0.re.max(1.0) {
                return Err(Error::Domain(format!("{name} must have a real positive mean")));
            }
        }
        let mut hs: Vec<MultiIndex> = nu.iter().map(|(k, _)| k.clone()).collect();
        hs.extend(sigma.iter().map(|(k, _)| k.clone()));
        hs.sort();
        hs.dedup();
        let offsets =
            hs.into_iter().map(|h| Offset { nu: nu.get(&h), sigma: sigma.get(&h), h }).collect();
        Ok(EllipticOperator {
            dim,
            nu,
            sigma,
            bounds: CoercivityBounds {
                alpha_star: 1.0,
                alpha_upper: 1.0,
                provenance: BoundsProvenance::UserSupplied,
            },
            offsets,
        })
    }

    /// Constant coefficients `ν = nu0`, `σ = sigma0`.
    pub fn constant(dim: usize, nu0: f64, sigma0: f64) -> Result<Self> {
        Self::new(CoefficientSpectrum::constant(dim, nu0), CoefficientSpectrum::constant(dim, sigma0))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nu(&self) -> &CoefficientSpectrum {
        &self.nu
    }

    pub fn sigma(&self) -> &CoefficientSpectrum {
        &self.sigma
    }

    pub fn bounds(&self) -> CoercivityBounds {
        self.bounds
    }

    pub fn alpha_star(&self) -> f64 {
        self.bounds.alpha_star
    }

    pub fn alpha_upper(&self) -> f64 {
        self.bounds.alpha_upper
    }

    /// Largest `|ℓ - k|` with a nonzero entry.
    pub fn bandwidth(&self) -> f64 {
        self.offsets.iter().map(|o| o.h.norm()).fold(0.0, f64::max)
    }

    /// Offsets `h` with `ν̂_h ≠ 0` or `σ̂_h ≠ 0`.
    pub fn offsets(&self) -> impl Iterator<Item = &MultiIndex> {
        self.offsets.iter().map(|o| &o.h)
    }

    fn entry_from(&self, l: &MultiIndex, k: &MultiIndex, nu: Complex64, sigma: Complex64) -> Complex64 {
        let s = basis_scale(self.dim) / (l.weight() * k.weight());
        (nu * l.dot(k) as f64 + sigma) * s
    }

    /// `a_{ℓ,k}`.
    pub fn entry(&self, l: &MultiIndex, k: &MultiIndex) -> Complex64 {
        let h = l.sub(k);
        self.entry_from(l, k, self.nu.get(&h), self.sigma.get(&h))
    }

    /// Toeplitz majorant `(2π)^{-d/2} (|ν̂_h| + |σ̂_h|)`.
    pub fn majorant(&self, h: &MultiIndex) -> f64 {
        basis_scale(self.dim) * (self.nu.get(h).norm() + self.sigma.get(h).norm())
    }

    /// Infimum of the diagonal, `(2π)^{-d/2} min(ν̂_0, σ̂_0)`.
    pub fn diag_min(&self) -> f64 {
        let z = MultiIndex::zero(self.dim);
        basis_scale(self.dim) * self.nu.get(&z).re.min(self.sigma.get(&z).re)
    }

    /// `Av` for an `H^1`-normalized `v`; the result is `H^{-1}`-normalized.
    pub fn apply(&self, v: &SpectralVector) -> SpectralVector {
        assert_eq!(v.dim(), self.dim, "dimension mismatch");
        let mut acc: BTreeMap<MultiIndex, Complex64> = BTreeMap::new();
        for (k, vk) in v.iter() {
            for o in &self.offsets {
                let l = k.add(&o.h);
                let a = self.entry_from(&l, k, o.nu, o.sigma);
                *acc.entry(l).or_insert(zero()) += a * vk;
            }
        }
        SpectralVector::from_entries(self.dim, Normalization::HMinus1, acc)
    }

    /// `Av` restricted to the rows in `rows`.
    pub fn apply_rows(&self, v: &SpectralVector, rows: &IndexSet) -> SpectralVector {
        let mut acc: BTreeMap<MultiIndex, Complex64> = BTreeMap::new();
        for (k, vk) in v.iter() {
            for o in &self.offsets {
                let l = k.add(&o.h);
                if rows.contains(&l) {
                    let a = self.entry_from(&l, k, o.nu, o.sigma);
                    *acc.entry(l).or_insert(zero()) += a * vk;
                }
            }
        }
        SpectralVector::from_entries(self.dim, Normalization::HMinus1, acc)
    }

    /// `|||v|||^2 = Re(v^H A v)`.
    pub fn energy_norm_sq(&self, v: &SpectralVector) -> f64 {
        v.inner(&self.apply(v)).re
    }

    pub fn energy_norm(&self, v: &SpectralVector) -> f64 {
        self.energy_norm_sq(v).max(0.0).sqrt()
    }

    /// Dense matrix `(a_{ℓ,k})` for `ℓ, k` in `indices`, in the given order.
    pub fn assemble(&self, indices: &[MultiIndex]) -> DMatrix<Complex64> {
        let n = indices.len();
        let pos: std::collections::HashMap<&MultiIndex, usize> =
            indices.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let mut m = DMatrix::from_element(n, n, zero());
        for (j, k) in indices.iter().enumerate() {
            for o in &self.offsets {
                let l = k.add(&o.h);
                if let Some(&i) = pos.get(&l) {
                    m[(i, j)] = self.entry_from(&l, k, o.nu, o.sigma);
                }
            }
        }
        m
    }

    /// Same coercivity constants with different (typically truncated) spectra.
    pub(crate) fn with_spectra(&self, nu: CoefficientSpectrum, sigma: CoefficientSpectrum) -> EllipticOperator {
        let mut op = Self::unchecked(nu, sigma).expect("spectra keep the means");
        op.bounds = CoercivityBounds { provenance: BoundsProvenance::Inherited, ..self.bounds };
        op
    }

    /// `A_J`: entries with `|ℓ - k| > J` set to zero.
    pub fn truncate(&self, j: usize) -> EllipticOperator {
        let r = j as f64;
        self.with_spectra(self.nu.truncate(r), self.sigma.truncate(r))
    }
}

/// Sampled coercivity and continuity constants `α_* = min(ν_*, σ_*)`, `α^* = max(ν^*, σ^*)`.
///
/// Each coefficient is evaluated on a uniform grid; the extrema are widened by
/// the Lipschitz slack `Σ |k||ĉ_k| (2π)^{-d/2} h` and by the spectrum's tail bound.
pub fn coercivity_bounds(op: &EllipticOperator, oversample: usize) -> Result<CoercivityBounds> {
    let (nu_lo, nu_hi) = sampled_range(&op.nu, oversample)?;
    let (s_lo, s_hi) = sampled_range(&op.sigma, oversample)?;
    let lower = nu_lo.min(s_lo);
    if !(lower > 0.0) {
        return Err(Error::NonCoercive { lower });
    }
    Ok(CoercivityBounds {
        alpha_star: lower,
        alpha_upper: nu_hi.max(s_hi),
        provenance: BoundsProvenance::ExactSampled,
    })
}

fn sampled_range(c: &CoefficientSpectrum, oversample: usize) -> Result<(f64, f64)> {
    let d = c.dim();
    let deg = c.max_degree().max(0) as usize;
    if deg == 0 {
        let v = c.evaluate(&vec![0.0; d]);
        return Ok((v - c.tail_bound(), v + c.tail_bound()));
    }
    let cap = (MAX_SAMPLES as f64).powf(1.0 / d as f64).floor() as usize;
    let m = (oversample.max(1) * deg).max(8).min(cap);
    let h = 2.0 * PI / m as f64;
    let deg_i = deg as i64;
    // table[j][k + deg] = e^{i k x_j} on the one-dimensional grid.
    let table: Vec<Vec<Complex64>> = (0..m)
        .map(|j| (-deg_i..=deg_i).map(|k| Complex64::from_polar(1.0, k as f64 * j as f64 * h)).collect())
        .collect();
    let terms: Vec<(Vec<usize>, Complex64)> = c
        .iter()
        .map(|(k, v)| (k.components().iter().map(|&x| (x + deg_i) as usize).collect(), *v))
        .collect();
    let s = basis_scale(d);
    let total = m.pow(d as u32);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut grid = vec![0usize; d];
    for idx in 0..total {
        let mut r = idx;
        for g in grid.iter_mut() {
            *g = r % m;
            r /= m;
        }
        let val: f64 = s * terms
            .iter()
            .map(|(k, v)| {
                let phase = k.iter().zip(&grid).fold(Complex64::new(1.0, 0.0), |acc, (&kj, &gj)| acc * table[gj][kj]);
                (v * phase).re
            })
            .sum::<f64>();
        lo = lo.min(val);
        hi = hi.max(val);
    }
    let slack = c.gradient_bound() * h + c.tail_bound();
    Ok((lo - slack, hi + slack))
}

/// Off-diagonal decay profile of a matrix class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayKind {
    /// `|a_{ℓ,k}| <= c_L (1 + |ℓ-k|)^{-η_L}`.
    Algebraic,
    /// `|a_{ℓ,k}| <= c_L e^{-η_L |ℓ-k|}`.
    Exponential,
}

impl DecayKind {
    /// Decay profile evaluated at distance `r`.
    pub fn profile(&self, eta: f64, r: f64) -> f64 {
        match self {
            DecayKind::Algebraic => (1.0 + r).powf(-eta),
            DecayKind::Exponential => (-eta * r).exp(),
        }
    }
}

impl fmt::Display for DecayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecayKind::Algebraic => write!(f, "algebraic"),
            DecayKind::Exponential => write!(f, "exponential"),
        }
    }
}

/// Global off-diagonal bound for the stiffness matrix.
///
/// A diagonal operator is represented by `eta_l = +∞` and `c_l = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayCertificate {
    pub kind: DecayKind,
    pub eta_l: f64,
    pub c_l: f64,
    pub diag_min: f64,
}

impl DecayCertificate {
    pub fn is_diagonal(&self) -> bool {
        self.eta_l.is_infinite()
    }

    /// Certified bound on `|a_{ℓ,k}|` for `|ℓ - k| = r > 0`.
    pub fn bound(&self, r: f64) -> f64 {
        if self.is_diagonal() {
            0.0
        } else {
            self.c_l * self.kind.profile(self.eta_l, r)
        }
    }
}

impl fmt::Display for DecayCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "kind={} eta_L={:.6} c_L={:.6e} diag_min={:.6}",
            self.kind, self.eta_l, self.c_l, self.diag_min
        )
    }
}

struct Regression {
    slope: f64,
    r2: f64,
}

fn regress(x: &[f64], y: &[f64]) -> Regression {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Regression { slope, r2 }
}

/// Exponential rate used when the envelope has a single radius `r`: the value
/// maximizing `(e^η - 1) e^{-η r}`, capped at 10.
fn single_radius_rate(r: f64) -> f64 {
    if r > 1.0 + 1e-12 {
        (r / (r - 1.0)).ln().min(10.0)
    } else {
        10.0
    }
}

/// Fits an off-diagonal decay certificate from the coefficient spectra.
///
/// The rate comes from a least-squares fit to the majorant envelope on
/// `0 < |h| <= window`; the constant is then the supremum over every stored
/// offset, so the bound holds for all entries of the matrix.
pub fn certify_decay(op: &EllipticOperator, window: usize) -> Result<DecayCertificate> {
    if window < 8 {
        return Err(Error::Domain(format!("certification window must be at least 8, got {window}")));
    }
    let diag_min = op.diag_min();
    let majorants: Vec<(f64, f64)> = op
        .offsets()
        .filter(|h| !h.is_zero())
        .map(|h| (h.norm(), op.majorant(h)))
        .filter(|(_, m)| *m > 0.0)
        .collect();
    if majorants.is_empty() {
        return Ok(DecayCertificate {
            kind: DecayKind::Exponential,
            eta_l: f64::INFINITY,
            c_l: 0.0,
            diag_min,
        });
    }
    let mut envelope: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for &(r, m) in &majorants {
        if r <= window as f64 {
            let key = (r * r).round() as u64;
            let e = envelope.entry(key).or_insert((r, 0.0));
            e.1 = e.1.max(m);
        }
    }
    let r_max = majorants.iter().map(|p| p.0).fold(0.0, f64::max);
    let (kind, eta) = if envelope.len() < 2 {
        let r = envelope.values().next().map(|p| p.0).unwrap_or(r_max);
        (DecayKind::Exponential, single_radius_rate(r))
    } else {
        let r: Vec<f64> = envelope.values().map(|p| p.0).collect();
        let y: Vec<f64> = envelope.values().map(|p| p.1.ln()).collect();
        let lin = regress(&r, &y);
        let logr: Vec<f64> = r.iter().map(|x| (1.0 + x).ln()).collect();
        let log = regress(&logr, &y);
        let exp_fit = (DecayKind::Exponential, -lin.slope, lin.r2);
        let alg_fit = (DecayKind::Algebraic, -log.slope, log.r2);
        let (first, second) =
            if exp_fit.2 >= alg_fit.2 { (exp_fit, alg_fit) } else { (alg_fit, exp_fit) };
        if first.1 > 1e-8 {
            (first.0, first.1)
        } else if second.1 > 1e-8 {
            (second.0, second.1)
        } else {
            (DecayKind::Exponential, single_radius_rate(r_max))
        }
    };
    let c_l = majorants.iter().map(|&(r, m)| m / kind.profile(eta, r)).fold(0.0, f64::max);
    Ok(DecayCertificate { kind, eta_l: eta, c_l, diag_min })
}

/// Outcome of the inverse-decay restriction check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InverseDecay {
    /// `A^{-1}` decays at rate `eta_bar = -log z_bar`.
    Accepted { eta_bar: f64, z_bar: f64, c_scaled: f64 },
    /// `c_L / diag_min >= (e^{η_L} - 1)/2`.
    Rejected { c_scaled: f64, limit: f64 },
}

/// Decay rate of the inverse of an exponentially decaying matrix.
///
/// With `c = c_L / diag_min`, the restriction `c < (e^{η_L} - 1)/2` is checked
/// and `z̄` is the root in `(0, 1)` of
/// `z^2 - (e^{2η_L} + 2c + 1)/(e^{η_L}(c + 1)) z + 1`.
pub fn inverse_decay_rate(c_l: f64, eta_l: f64, diag_min: f64) -> Result<InverseDecay> {
    if !(c_l > 0.0 && eta_l > 0.0 && diag_min > 0.0) {
        return Err(Error::Domain(format!(
            "inverse decay needs positive inputs (c_L = {c_l}, η_L = {eta_l}, diag_min = {diag_min})"
        )));
    }
    let c = c_l / diag_min;
    let limit = 0.5 * (eta_l.exp() - 1.0);
    if !(c < limit) {
        return Ok(InverseDecay::Rejected { c_scaled: c, limit });
    }
    let e = eta_l.exp();
    let b = (e * e + 2.0 * c + 1.0) / (e * (c + 1.0));
    // Stable small root: z = 2 / (b + sqrt(b^2 - 4)).
    let z = 2.0 / (b + (b * b - 4.0).sqrt());
    Ok(InverseDecay::Accepted { eta_bar: -z.ln(), z_bar: z, c_scaled: c })
}

/// Rate and constant of an exponential bound `|(A^{-1})_{ℓ,k}| <= c e^{-η |ℓ-k|}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InverseBound {
    pub kind: DecayKind,
    pub eta: f64,
    pub c: f64,
}

/// Entrywise bound on `A^{-1}` from an exponential certificate.
///
/// Writing `A = D (I + E)` with `|E_{ℓ,k}| <= c e^{-η|ℓ-k|}`, the Neumann
/// series is dominated by the Toeplitz matrix of `g = 1 / (1 - c h)` with
/// `h(θ) = Σ_{j≠0} e^{-η|j|} e^{ijθ}`. The constant is
/// `max_j g_j z̄^{-|j|} / diag_min`, with the Fourier coefficients `g_j`
/// computed on a fine grid. The construction is one-dimensional; in higher
/// dimensions the same numbers are used as an estimate.
pub fn inverse_bound(cert: &DecayCertificate) -> Result<Option<InverseBound>> {
    if cert.kind != DecayKind::Exponential {
        return Err(Error::Domain("inverse bound needs an exponential certificate".into()));
    }
    if cert.is_diagonal() {
        return Ok(Some(InverseBound {
            kind: DecayKind::Exponential,
            eta: f64::INFINITY,
            c: 1.0 / cert.diag_min,
        }));
    }
    let (eta_bar, z_bar, c) = match inverse_decay_rate(cert.c_l, cert.eta_l, cert.diag_min)? {
        InverseDecay::Accepted { eta_bar, z_bar, c_scaled } => (eta_bar, z_bar, c_scaled),
        InverseDecay::Rejected { .. } => return Ok(None),
    };
    let k_max = ((40.0 / eta_bar).ceil() as usize).max(16);
    let m = (8 * k_max).next_power_of_two().min(1 << 20);
    let r = (-cert.eta_l).exp();
    let g: Vec<f64> = (0..m)
        .map(|j| {
            let theta = 2.0 * PI * j as f64 / m as f64;
            let w = Complex64::from_polar(r, theta);
            let h = 2.0 * (w / (Complex64::new(1.0, 0.0) - w)).re;
            1.0 / (1.0 - c * h)
        })
        .collect();
    let cos_table: Vec<f64> = (0..m).map(|j| (2.0 * PI * j as f64 / m as f64).cos()).collect();
    let g0 = g.iter().sum::<f64>() / m as f64;
    let mut best = g0;
    for k in 1..k_max.min(m / 2) {
        let gk = g.iter().enumerate().map(|(j, v)| v * cos_table[(j * k) % m]).sum::<f64>()
            / m as f64;
        if gk.abs() < 1e-13 * g0 {
            break;
        }
        best = best.max(gk.abs() * z_bar.powi(-(k as i32)));
    }
    Ok(Some(InverseBound { kind: DecayKind::Exponential, eta: eta_bar, c: best / cert.diag_min }))
}

/// Measured off-diagonal decay of the inverse of a finite window.
#[derive(Clone, Debug, PartialEq)]
pub struct InverseDecayMeasurement {
    /// Fitted exponential rate of the envelope `max |(A_W^{-1})_{ℓ,k}|` over `|ℓ-k|`.
    pub rate: f64,
    /// Smallest `c` with `envelope(r) <= c e^{-rate r}` on the measured range.
    pub constant: f64,
    pub r2: f64,
    /// `(r, envelope(r))` pairs used by the fit.
    pub envelope: Vec<(f64, f64)>,
}

/// Inverts the Galerkin matrix on the ball `|k| <= radius` and fits the decay
/// of its entries away from the diagonal.
pub fn measure_inverse_decay(op: &EllipticOperator, radius: usize) -> Result<InverseDecayMeasurement> {
    let indices = MultiIndex::ball(op.dim(), radius as f64);
    let a = op.assemble(&indices);
    let n = indices.len();
    let inv = a.cholesky().ok_or(Error::Indefinite { size: n })?.inverse();
    let mut env: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for (j, k) in indices.iter().enumerate() {
        for (i, l) in indices.iter().enumerate() {
            let h = l.sub(k);
            let key = h.norm_sq() as u64;
            let e = env.entry(key).or_insert((h.norm(), 0.0));
            e.1 = e.1.max(inv[(i, j)].norm());
        }
    }
    let peak = env.values().map(|p| p.1).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = env
        .values()
        .filter(|(r, m)| *r > 0.0 && *m > 1e-12 * peak && *r <= radius as f64)
        .copied()
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, found: pts.len() });
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let fit = regress(&x, &y);
    let rate = -fit.slope;
    let constant = pts.iter().map(|&(r, m)| m * (rate * r).exp()).fold(peak, f64::max);
    Ok(InverseDecayMeasurement { rate, constant, r2: fit.r2, envelope: pts })
}

/// `ψ(J)`: a bound on `‖B - B_J‖` for a matrix `B` with a given off-diagonal decay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationModel {
    pub kind: DecayKind,
    pub eta: f64,
    /// The constant `C` in `ψ(J) = C (J+1)^{-(η-d)}` or `C (J+1)^{d-1} e^{-ηJ}`.
    pub constant: f64,
    pub dim: usize,
    /// Radii above `explicit_limit` use the looser constant `far_constant`.
    pub explicit_limit: usize,
    pub far_constant: f64,
}

impl TruncationModel {
    pub fn new(kind: DecayKind, eta: f64, constant: f64, dim: usize) -> Result<Self> {
        if !(constant >= 0.0) || dim == 0 || !(eta > 0.0) {
            return Err(Error::Domain("truncation model needs η > 0, C >= 0, d >= 1".into()));
        }
        if kind == DecayKind::Algebraic && eta <= dim as f64 {
            return Err(Error::Domain(format!(
                "algebraic decay rate {eta} does not exceed the dimension {dim}; the truncation error does not decay"
            )));
        }
        Ok(TruncationModel {
            kind,
            eta,
            constant,
            dim,
            explicit_limit: usize::MAX,
            far_constant: constant,
        })
    }

    /// Model for an operator with the given certificate, with the constant
    /// obtained from the Schur row-sum bound `sup_J S(J) / shape(J)`,
    /// `S(J) = Σ_{|h|>J} bound(|h|)`.
    pub fn from_certificate(cert: &DecayCertificate, dim: usize) -> Result<Self> {
        if cert.is_diagonal() {
            return Ok(TruncationModel {
                kind: DecayKind::Exponential,
                eta: f64::INFINITY,
                constant: 0.0,
                dim,
                explicit_limit: usize::MAX,
                far_constant: 0.0,
            });
        }
        Self::from_decay(cert.kind, cert.eta_l, cert.c_l, dim)
    }

    /// Schur-bound model for `|b_{ℓ,k}| <= c · profile(|ℓ-k|)`.
    pub fn from_decay(kind: DecayKind, eta: f64, c: f64, dim: usize) -> Result<Self> {
        let model = TruncationModel::new(kind, eta, 1.0, dim)?;
        let sums = RowSums::new(kind, eta, dim);
        let limit = sums.explicit_limit();
        let mut near: f64 = 0.0;
        for j in 0..=limit {
            near = near.max(sums.tail_sum(j) / model.shape(j));
        }
        let mut far = near;
        let mut j = limit as f64 + 1.0;
        while j < 1e7 {
            far = far.max(sums.integral_tail(j) / model.shape_f(j));
            j = (j * 1.25).ceil();
        }
        Ok(TruncationModel {
            constant: c * near,
            far_constant: c * far,
            explicit_limit: limit,
            ..model
        })
    }

    fn shape_f(&self, j: f64) -> f64 {
        let d = self.dim as f64;
        match self.kind {
            DecayKind::Algebraic => (j + 1.0).powf(-(self.eta - d)),
            DecayKind::Exponential => (j + 1.0).powf(d - 1.0) * (-self.eta * j).exp(),
        }
    }

    fn shape(&self, j: usize) -> f64 {
        self.shape_f(j as f64)
    }

    pub fn psi(&self, j: usize) -> f64 {
        let c = if j <= self.explicit_limit { self.constant } else { self.far_constant };
        if c == 0.0 {
            return 0.0;
        }
        c * self.shape(j)
    }
}

/// Tail sums `Σ_{|h|>J} profile(|h|)` over `Z^d`: explicit lattice sums up to a
/// radius `R` plus an integral bound beyond it.
struct RowSums {
    kind: DecayKind,
    eta: f64,
    dim: usize,
    radius: usize,
    /// Distinct norms `|h| <= R` with their summed profile values, ascending.
    shells: Vec<(f64, f64)>,
}

impl RowSums {
    fn new(kind: DecayKind, eta: f64, dim: usize) -> Self {
        let max_points = 2_000_000f64;
        let cap = (max_points / crate::sparsity::omega(dim, Default::default()))
            .powf(1.0 / dim as f64)
            .floor() as usize;
        let wanted = match kind {
            DecayKind::Exponential => (60.0 / eta).ceil() as usize + 64,
            DecayKind::Algebraic => 4096,
        };
        let radius = wanted.min(cap).max(4);
        let mut shells: BTreeMap<i64, f64> = BTreeMap::new();
        for h in MultiIndex::ball(dim, radius as f64) {
            if h.is_zero() {
                continue;
            }
            *shells.entry(h.norm_sq()).or_insert(0.0) += kind.profile(eta, h.norm());
        }
        let shells = shells.into_iter().map(|(n2, v)| ((n2 as f64).sqrt(), v)).collect();
        RowSums { kind, eta, dim, radius, shells }
    }

    fn explicit_limit(&self) -> usize {
        let s = (self.dim as f64).sqrt() / 2.0;
        (self.radius as f64 - 2.0 * s - 1.0).max(0.0).min(400.0) as usize
    }

    fn tail_sum(&self, j: usize) -> f64 {
        let explicit: f64 =
            self.shells.iter().filter(|(r, _)| *r > j as f64 + 1e-12).map(|p| p.1).sum();
        explicit + self.integral_tail(self.radius as f64)
    }

    /// Bound on `Σ_{|h|>R} profile(|h|)` by comparison with an integral over
    /// unit cubes centred at the lattice points.
    fn integral_tail(&self, r: f64) -> f64 {
        let d = self.dim;
        let s = (d as f64).sqrt() / 2.0;
        let a = (r - 2.0 * s).max(0.0);
        let surface = d as f64 * crate::sparsity::omega(d, Default::default());
        match self.kind {
            DecayKind::Exponential => {
                // ∫_a^∞ (u+s)^{d-1} e^{-ηu} du, expanded term by term.
                let mut sum = 0.0;
                let mut fall = 1.0;
                for j in 0..d {
                    if j > 0 {
                        fall *= (d - j) as f64;
                    }
                    sum += fall * (a + s).powi((d - 1 - j) as i32) / self.eta.powi(j as i32 + 1);
                }
                surface * (-self.eta * a).exp() * sum
            }
            DecayKind::Algebraic => {
                let k = s.max(1.0).powi(d as i32 - 1);
                surface * k * (1.0 + a).powf(d as f64 - self.eta) / (self.eta - d as f64)
            }
        }
    }
}

/// `ψ_A(J)` for the operator certified by `cert`.
pub fn truncation_bound(cert: &DecayCertificate, j: usize, dim: usize) -> Result<f64> {
    Ok(TruncationModel::from_certificate(cert, dim)?.psi(j))
}

/// Spectral norm of a Hermitian matrix.
pub fn hermitian_norm(m: &DMatrix<Complex64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().map(|e| e.abs()).fold(0.0, f64::max)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}
