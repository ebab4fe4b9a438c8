//! Best-N-term errors, sparsity classes and empirical class fits.
//!
//! Two families of classes are supported. The algebraic class with exponent
//! `s` contains sequences whose decreasing rearrangement satisfies
//! `|v*_n| <= C n^{-1/τ}` with `1/τ = s/d + 1/2`. The exponential class with
//! parameters `(η, t)` requires
//! `|v*_n| <= C n^{(τ-1)/2} exp(-η ω_d^{-τ} n^τ)` with `τ = t/d`.

use std::fmt;

use crate::error::{Error, Result};
use crate::spectral_core::SpectralVector;

/// Constant used wherever a cardinality bound carries a safety factor.
pub const KAPPA: f64 = 2.0;

/// Minimum number of entries required by [`fit_class`].
pub const MIN_FIT_ENTRIES: usize = 8;

/// Moduli of the decreasing rearrangement.
pub fn rearranged_moduli(v: &SpectralVector) -> Vec<f64> {
    v.rearrange().into_iter().map(|(_, m)| m).collect()
}

/// `E_N(v)` for every `N = 0..=len`, accumulated from the smallest entry up.
pub fn best_n_errors(v: &SpectralVector) -> Vec<f64> {
    tail_errors_of(&rearranged_moduli(v))
}

/// `E_N` for every `N` given moduli in decreasing order.
pub fn tail_errors_of(moduli: &[f64]) -> Vec<f64> {
    let n = moduli.len();
    let mut out = vec![0.0; n + 1];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        acc += moduli[i] * moduli[i];
        out[i] = acc.sqrt();
    }
    out
}

/// `E_N(v) = (Σ_{n>N} |v*_n|^2)^{1/2}`.
pub fn best_n_error(v: &SpectralVector, n: usize) -> f64 {
    let moduli = rearranged_moduli(v);
    if n >= moduli.len() {
        return 0.0;
    }
    moduli[n..].iter().rev().map(|m| m * m).sum::<f64>().sqrt()
}

/// Volume convention for the unit ball entering the exponential class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OmegaConvention {
    /// `ω_d = π^{d/2} / Γ(d/2 + 1)`.
    #[default]
    Euclidean,
    /// `ω_d = 2^d`.
    MaxNorm,
}

/// Volume of the unit ball in `R^d` under the given convention.
pub fn omega(d: usize, convention: OmegaConvention) -> f64 {
    assert!(d >= 1);
    match convention {
        OmegaConvention::MaxNorm => 2f64.powi(d as i32),
        OmegaConvention::Euclidean => {
            // ω_d = 2π/d · ω_{d-2}, with ω_0 = 1 and ω_1 = 2.
            let (mut w, start) = if d % 2 == 0 { (1.0, 2) } else { (2.0, 3) };
            let mut k = start;
            while k <= d {
                w *= 2.0 * std::f64::consts::PI / k as f64;
                k += 2;
            }
            w
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlgebraicClassParams {
    pub s: f64,
    pub d: usize,
}

impl AlgebraicClassParams {
    pub fn new(s: f64, d: usize) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!("algebraic exponent s must be positive, got {s}")));
        }
        if d == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        Ok(AlgebraicClassParams { s, d })
    }

    /// `1/τ = s/d + 1/2`.
    pub fn tau_inv(&self) -> f64 {
        self.s / self.d as f64 + 0.5
    }

    pub fn tau(&self) -> f64 {
        1.0 / self.tau_inv()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentialClassParams {
    pub eta: f64,
    pub t: f64,
    pub d: usize,
    pub omega: OmegaConvention,
}

impl ExponentialClassParams {
    pub fn new(eta: f64, t: f64, d: usize) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::Domain(format!("exponential rate η must be positive, got {eta}")));
        }
        if d == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        if !(t > 0.0 && t <= d as f64) {
            return Err(Error::Domain(format!("exponent t must lie in (0, {d}], got {t}")));
        }
        Ok(ExponentialClassParams { eta, t, d, omega: OmegaConvention::Euclidean })
    }

    pub fn with_omega(mut self, omega: OmegaConvention) -> Self {
        self.omega = omega;
        self
    }

    pub fn tau(&self) -> f64 {
        self.t / self.d as f64
    }

    pub fn omega_d(&self) -> f64 {
        omega(self.d, self.omega)
    }

    /// `η ω_d^{-τ}`, the effective rate multiplying `n^τ`.
    pub fn rate(&self) -> f64 {
        self.eta * self.omega_d().powf(-self.tau())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClassParams {
    Algebraic(AlgebraicClassParams),
    Exponential(ExponentialClassParams),
}

impl ClassParams {
    pub fn dim(&self) -> usize {
        match self {
            ClassParams::Algebraic(p) => p.d,
            ClassParams::Exponential(p) => p.d,
        }
    }

    /// Decay profile `φ(N)` of the function class; `φ(0) = 1`.
    pub fn phi(&self, n: f64) -> f64 {
        match self {
            ClassParams::Algebraic(p) => {
                if n <= 1.0 {
                    1.0
                } else {
                    n.powf(-p.s / p.d as f64)
                }
            }
            ClassParams::Exponential(p) => (-p.rate() * n.max(0.0).powf(p.tau())).exp(),
        }
    }

    /// `φ^{-1}(λ)` for `λ ∈ (0, 1]`.
    pub fn phi_inv(&self, lambda: f64) -> f64 {
        match self {
            ClassParams::Algebraic(p) => lambda.powf(-(p.d as f64) / p.s),
            ClassParams::Exponential(p) => {
                let dt = p.d as f64 / p.t;
                (p.omega_d() / p.eta.powf(dt)) * (1.0 / lambda).ln().max(0.0).powf(dt)
            }
        }
    }
}

/// `sup_n n^{1/τ} |v*_n|` over the support.
pub fn algebraic_quasinorm(v: &SpectralVector, params: &AlgebraicClassParams) -> f64 {
    algebraic_quasinorm_of(&rearranged_moduli(v), params)
}

pub fn algebraic_quasinorm_of(moduli: &[f64], params: &AlgebraicClassParams) -> f64 {
    let p = params.tau_inv();
    moduli
        .iter()
        .enumerate()
        .map(|(i, m)| ((i + 1) as f64).powf(p) * m)
        .fold(0.0, f64::max)
}

/// `sup_n n^{(1-τ)/2} exp(η ω_d^{-τ} n^τ) |v*_n|` over the support.
pub fn exponential_norm(v: &SpectralVector, params: &ExponentialClassParams) -> f64 {
    exponential_norm_of(&rearranged_moduli(v), params)
}

pub fn exponential_norm_of(moduli: &[f64], params: &ExponentialClassParams) -> f64 {
    exponential_profile(moduli, params).into_iter().fold(0.0, f64::max)
}

/// The running terms `n^{(1-τ)/2} exp(η ω_d^{-τ} n^τ) |v*_n|`, evaluated in log space.
pub fn exponential_profile(moduli: &[f64], params: &ExponentialClassParams) -> Vec<f64> {
    let tau = params.tau();
    let rate = params.rate();
    moduli
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            if m == 0.0 {
                return 0.0;
            }
            let n = (i + 1) as f64;
            (m.ln() + 0.5 * (1.0 - tau) * n.ln() + rate * n.powf(tau)).exp()
        })
        .collect()
}

/// Function-class norm `sup_{N>=0} E_N(v) / φ(N)`.
pub fn class_norm(v: &SpectralVector, params: &ClassParams) -> f64 {
    let errs = best_n_errors(v);
    let base = match params {
        ClassParams::Algebraic(_) => v.norm(),
        ClassParams::Exponential(_) => 0.0,
    };
    errs.iter()
        .enumerate()
        .map(|(n, &e)| {
            if e == 0.0 {
                0.0
            } else {
                e / params.phi(n as f64)
            }
        })
        .fold(base, f64::max)
}

/// Number of terms sufficient to reach accuracy `eps` for a sequence of the
/// given class norm: `⌈φ^{-1}(ε / norm)⌉ + 1`, or 0 when `ε > norm`.
pub fn min_dofs(class_norm: f64, eps: f64, params: &ClassParams) -> Result<usize> {
    if !(class_norm > 0.0) || !(eps > 0.0) {
        return Err(Error::Domain(format!(
            "class norm and accuracy must be positive (norm = {class_norm}, ε = {eps})"
        )));
    }
    if eps > class_norm {
        return Ok(0);
    }
    let x = params.phi_inv(eps / class_norm);
    let n = (x - 1e-9 * x.max(1.0)).ceil().max(0.0);
    Ok(n as usize + 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassKind {
    Algebraic,
    Exponential,
}

impl std::str::FromStr for ClassKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "algebraic" => Ok(ClassKind::Algebraic),
            "exponential" => Ok(ClassKind::Exponential),
            other => Err(Error::Parse(format!("unknown class kind '{other}'"))),
        }
    }
}

/// Empirical class estimate for a finite sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassFit {
    pub kind: ClassKind,
    pub params: ClassParams,
    /// The class quasi-norm sup evaluated over the fit window.
    pub quasinorm: f64,
    pub r2: f64,
    /// Inclusive range of rearranged positions used by the fit.
    pub window: (usize, usize),
}

impl fmt::Display for ClassFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, params) = match &self.params {
            ClassParams::Algebraic(p) => ("algebraic", format!("s={:.6}", p.s)),
            ClassParams::Exponential(p) => {
                ("exponential", format!("eta={:.6},t={:.6}", p.eta, p.t))
            }
        };
        write!(
            f,
            "kind={} params={} quasinorm={:.6e} r2={:.6} window={}..{}",
            kind, params, self.quasinorm, self.r2, self.window.0, self.window.1
        )
    }
}

struct LineFit {
    slope: f64,
    r2: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    LineFit { slope, r2 }
}

fn fit_window(len: usize) -> usize {
    len - len / 10
}

fn checked_moduli(v: &SpectralVector) -> Result<Vec<f64>> {
    let moduli = rearranged_moduli(v);
    if moduli.len() < MIN_FIT_ENTRIES {
        return Err(Error::InsufficientData { needed: MIN_FIT_ENTRIES, found: moduli.len() });
    }
    Ok(moduli)
}

/// Fits the requested class to the decreasing rearrangement of `v`.
pub fn fit_class(v: &SpectralVector, kind: ClassKind) -> Result<ClassFit> {
    let moduli = checked_moduli(v)?;
    match kind {
        ClassKind::Algebraic => fit_algebraic_moduli(&moduli, v.dim()),
        ClassKind::Exponential => fit_exponential_moduli(&moduli, v.dim()),
    }
}

/// Exponential fit with the exponent `t` held fixed.
pub fn fit_exponential_fixed_t(v: &SpectralVector, t: f64) -> Result<ClassFit> {
    let moduli = checked_moduli(v)?;
    let d = v.dim();
    if !(t > 0.0 && t <= d as f64) {
        return Err(Error::Domain(format!("exponent t must lie in (0, {d}], got {t}")));
    }
    let w = fit_window(moduli.len());
    let (eta, r2) = exponential_regression(&moduli[..w], d, t);
    finish_exponential(&moduli, w, d, t, eta, r2)
}

pub fn fit_algebraic_moduli(moduli: &[f64], d: usize) -> Result<ClassFit> {
    if moduli.len() < MIN_FIT_ENTRIES {
        return Err(Error::InsufficientData { needed: MIN_FIT_ENTRIES, found: moduli.len() });
    }
    let w = fit_window(moduli.len());
    let x: Vec<f64> = (1..=w).map(|n| (n as f64).ln()).collect();
    let y: Vec<f64> = moduli[..w].iter().map(|m| m.ln()).collect();
    let line = least_squares(&x, &y);
    let tau_inv = -line.slope;
    let s = d as f64 * (tau_inv - 0.5);
    let params = AlgebraicClassParams::new(s, d).map_err(|_| {
        Error::Domain(format!("fitted decay 1/τ = {tau_inv:.4} is too slow for an algebraic class"))
    })?;
    Ok(ClassFit {
        kind: ClassKind::Algebraic,
        params: ClassParams::Algebraic(params),
        quasinorm: algebraic_quasinorm_of(&moduli[..w], &params),
        r2: line.r2,
        window: (1, w),
    })
}

fn exponential_regression(moduli: &[f64], d: usize, t: f64) -> (f64, f64) {
    let tau = t / d as f64;
    let om = omega(d, OmegaConvention::Euclidean).powf(-tau);
    let x: Vec<f64> = (1..=moduli.len()).map(|n| -om * (n as f64).powf(tau)).collect();
    let y: Vec<f64> = moduli
        .iter()
        .enumerate()
        .map(|(i, m)| m.ln() - 0.5 * (tau - 1.0) * ((i + 1) as f64).ln())
        .collect();
    let line = least_squares(&x, &y);
    (line.slope, line.r2)
}

fn finish_exponential(
    moduli: &[f64],
    w: usize,
    d: usize,
    t: f64,
    eta: f64,
    r2: f64,
) -> Result<ClassFit> {
    let params = ExponentialClassParams::new(eta, t, d)
        .map_err(|_| Error::Domain(format!("fitted exponential rate {eta:.4} is not positive")))?;
    Ok(ClassFit {
        kind: ClassKind::Exponential,
        params: ClassParams::Exponential(params),
        quasinorm: exponential_norm_of(&moduli[..w], &params),
        r2,
        window: (1, w),
    })
}

pub fn fit_exponential_moduli(moduli: &[f64], d: usize) -> Result<ClassFit> {
    if moduli.len() < MIN_FIT_ENTRIES {
        return Err(Error::InsufficientData { needed: MIN_FIT_ENTRIES, found: moduli.len() });
    }
    let w = fit_window(moduli.len());
    let df = d as f64;
    let steps = 64;
    let scan = |lo: f64, hi: f64| -> Option<(f64, f64, f64)> {
        let mut best: Option<(f64, f64, f64)> = None;
        for i in 1..=steps {
            let t = lo + (hi - lo) * i as f64 / steps as f64;
            if !(t > 0.0 && t <= df) {
                continue;
            }
            let (eta, r2) = exponential_regression(&moduli[..w], d, t);
            if eta > 0.0 && best.map_or(true, |b| r2 > b.2) {
                best = Some((t, eta, r2));
            }
        }
        best
    };
    let (t0, _, _) = scan(0.0, df)
        .ok_or_else(|| Error::Domain("no decaying exponential fit exists".into()))?;
    let h = df / steps as f64;
    let lo = (t0 - h).max(0.0);
    let hi = (t0 + h).min(df);
    let coarse = {
        let (eta, r2) = exponential_regression(&moduli[..w], d, t0);
        (t0, eta, r2)
    };
    let (t, eta, r2) = match scan(lo, hi) {
        Some(fine) if fine.2 >= coarse.2 => fine,
        _ => coarse,
    };
    finish_exponential(moduli, w, d, t, eta, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_core::Normalization;

    fn seq(values: impl IntoIterator<Item = f64>) -> SpectralVector {
        let entries: Vec<(i64, f64)> =
            values.into_iter().enumerate().map(|(i, v)| (i as i64, v)).collect();
        SpectralVector::from_real_1d(Normalization::H1, &entries)
    }

    #[test]
    fn best_n_error_examples() {
        let v = seq([3.0, 4.0]);
        assert_eq!(best_n_error(&v, 1), 3.0);
        assert_eq!(best_n_error(&v, 2), 0.0);
        assert_eq!(best_n_error(&v, 7), 0.0);
        assert_eq!(best_n_error(&v, 0), 5.0);
    }

    #[test]
    fn best_n_error_geometric() {
        let v = seq((1..=60).map(|n| (-(n as f64)).exp()));
        for n in [0usize, 1, 5, 20] {
            let oracle = (-((n + 1) as f64)).exp() / (1.0 - (-2f64).exp()).sqrt();
            assert!((best_n_error(&v, n) - oracle).abs() < 1e-8, "N = {n}");
        }
    }

    #[test]
    fn omega_values() {
        assert_eq!(omega(1, OmegaConvention::Euclidean), 2.0);
        assert!((omega(2, OmegaConvention::Euclidean) - std::f64::consts::PI).abs() < 1e-15);
        let w3 = 4.0 / 3.0 * std::f64::consts::PI;
        assert!((omega(3, OmegaConvention::Euclidean) - w3).abs() < 1e-14);
        assert_eq!(omega(3, OmegaConvention::MaxNorm), 8.0);
    }

    #[test]
    fn quasinorm_examples() {
        let p = AlgebraicClassParams::new(1.0, 1).unwrap();
        let v = seq((1..=50).map(|n| (n as f64).powf(-p.tau_inv())));
        assert!((algebraic_quasinorm(&v, &p) - 1.0).abs() < 1e-12);
        assert_eq!(algebraic_quasinorm(&SpectralVector::new(1, Normalization::H1), &p), 0.0);

        let e = ExponentialClassParams::new(0.8, 1.0, 1).unwrap();
        let v = seq((1..=50).map(|n| (-0.4 * n as f64).exp()));
        assert!((exponential_norm(&v, &e) - 1.0).abs() < 1e-12);
        let single = seq([0.3]);
        assert!((exponential_norm(&single, &e) - 0.3 * 0.4f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn min_dofs_examples() {
        let alg = ClassParams::Algebraic(AlgebraicClassParams::new(1.0, 1).unwrap());
        assert_eq!(min_dofs(1.0, 0.1, &alg).unwrap(), 11);
        let exp = ClassParams::Exponential(ExponentialClassParams::new(1.0, 1.0, 1).unwrap());
        assert_eq!(min_dofs(1.0, (-5f64).exp(), &exp).unwrap(), 11);
        assert_eq!(min_dofs(2.0, 2.0, &exp).unwrap(), 1);
        assert_eq!(min_dofs(1.0, 3.0, &exp).unwrap(), 0);
        assert!(min_dofs(0.0, 0.1, &exp).is_err());
        assert!(min_dofs(1.0, -0.1, &alg).is_err());
    }

    #[test]
    fn fit_examples() {
        let v = seq((1..=400).map(|n| (n as f64).powi(-2)));
        let fit = fit_class(&v, ClassKind::Algebraic).unwrap();
        match fit.params {
            ClassParams::Algebraic(p) => {
                assert!((p.tau_inv() - 2.0).abs() < 0.04);
                assert!((p.s - 1.5).abs() < 0.03);
            }
            _ => panic!(),
        }
        let v = seq((1..=200).map(|n| (-(n as f64)).exp()));
        let fit = fit_class(&v, ClassKind::Exponential).unwrap();
        match fit.params {
            ClassParams::Exponential(p) => {
                assert!((p.t - 1.0).abs() < 0.05, "t = {}", p.t);
                assert!((p.eta - 2.0).abs() < 0.1, "eta = {}", p.eta);
            }
            _ => panic!(),
        }
        assert!(fit.r2 > 0.999);
        assert!(fit.to_string().starts_with("kind=exponential params=eta="));
    }

    #[test]
    fn fit_needs_eight_entries() {
        let v = seq((1..=7).map(|n| 1.0 / n as f64));
        assert!(matches!(
            fit_class(&v, ClassKind::Algebraic),
            Err(Error::InsufficientData { needed: 8, found: 7 })
        ));
    }

    #[test]
    fn class_norm_bounds_tail() {
        let e = ExponentialClassParams::new(1.0, 1.0, 1).unwrap();
        let v = seq((0..40).map(|n| (-(n as f64)).exp()));
        let p = ClassParams::Exponential(e);
        let norm = class_norm(&v, &p);
        for (n, err) in best_n_errors(&v).into_iter().enumerate() {
            assert!(err <= norm * p.phi(n as f64) * (1.0 + 1e-12));
        }
    }
}
