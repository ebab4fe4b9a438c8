//! Test problems with known solutions.

use std::f64::consts::PI;

use crate::algorithms::Problem;
use crate::error::Result;
use crate::operator::{basis_scale, CoefficientSpectrum, EllipticOperator};
use crate::spectral_core::{MultiIndex, Normalization, SpectralVector};
use crate::Complex64;

/// A problem `A u = f` whose exact solution is stored alongside.
#[derive(Clone, Debug)]
pub struct Manufactured {
    pub name: String,
    pub problem: Problem,
    /// `H^1`-normalized exact solution.
    pub exact: SpectralVector,
}

impl Manufactured {
    fn new(name: &str, op: EllipticOperator, exact: SpectralVector) -> Self {
        let f = op.apply(&exact);
        Manufactured { name: name.into(), problem: Problem::new(op, f), exact }
    }
}

/// `c0 + Σ_{0<|h|<=radius} amp e^{-rate|h|} e^{ih·x}`.
fn decaying_spectrum(d: usize, c0: f64, amp: f64, rate: f64, radius: f64) -> Result<CoefficientSpectrum> {
    let s = 1.0 / basis_scale(d);
    let entries = MultiIndex::ball(d, radius).into_iter().map(|h| {
        let v = if h.is_zero() { c0 } else { amp * (-rate * h.norm()).exp() };
        (h, Complex64::new(v * s, 0.0))
    });
    CoefficientSpectrum::new(d, entries)
}

fn decaying_solution(d: usize, rate: f64, radius: f64) -> SpectralVector {
    let entries = MultiIndex::ball(d, radius).into_iter().map(|k| {
        let phase = 0.3 * k.components().iter().map(|&c| c as f64).sum::<f64>();
        let v = Complex64::from_polar((-rate * k.norm()).exp(), phase);
        (k, v)
    });
    SpectralVector::from_entries(d, Normalization::H1, entries)
}

/// 1D operator with `ν̂_h = sqrt(2π) 0.3 e^{-|h|}`, `σ̂_h = sqrt(2π) 0.1 e^{-|h|}` off the
/// mean and unit means, so that `c_L = 0.4`, `η_L = 1` and the diagonal infimum is 1.
pub fn exponential_operator_1d() -> Result<EllipticOperator> {
    EllipticOperator::new(
        decaying_spectrum(1, 1.0, 0.3, 1.0, 30.0)?,
        decaying_spectrum(1, 1.0, 0.1, 1.0, 30.0)?,
    )
}

/// 2D analog with rate 2 and degree 8.
pub fn exponential_operator_2d() -> Result<EllipticOperator> {
    EllipticOperator::new(
        decaying_spectrum(2, 1.0, 0.3, 2.0, 8.0)?,
        decaying_spectrum(2, 1.0, 0.1, 2.0, 8.0)?,
    )
}

/// Exact solution `U_k = e^{-|k|/2 + iφ_k}` on `|k| <= 60`.
pub fn manufactured_1d() -> Result<Manufactured> {
    Ok(Manufactured::new("manufactured_1d", exponential_operator_1d()?, decaying_solution(1, 0.5, 60.0)))
}

/// Exact solution `U_k = e^{-|k| + iφ_k}` on `|k| <= 12`.
pub fn manufactured_2d() -> Result<Manufactured> {
    Ok(Manufactured::new("manufactured_2d", exponential_operator_2d()?, decaying_solution(2, 1.0, 12.0)))
}

/// Exponential-class solution for coarsening runs: `U_k = e^{-0.3|k|}` on `|k| <= 80`.
pub fn exponential_problem() -> Result<Manufactured> {
    Ok(Manufactured::new("exponential", exponential_operator_1d()?, decaying_solution(1, 0.3, 80.0)))
}

/// `k`-th index of the ordering `0, 1, -1, 2, -2, ...` (1-based).
pub fn zigzag(n: usize) -> i64 {
    if n == 1 {
        0
    } else if n % 2 == 0 {
        (n / 2) as i64
    } else {
        -((n / 2) as i64)
    }
}

/// Solution whose rearrangement is exactly `n^{-1/τ}`, `1/τ = s + 1/2`, with `terms` nonzeros.
pub fn algebraic_solution(s: f64, terms: usize) -> SpectralVector {
    let p = s + 0.5;
    let entries: Vec<(i64, f64)> = (1..=terms).map(|n| (zigzag(n), (n as f64).powf(-p))).collect();
    SpectralVector::from_real_1d(Normalization::H1, &entries)
}

/// Algebraic synthetic problem on the 1D exponential operator.
pub fn algebraic_problem(s: f64, terms: usize) -> Result<Manufactured> {
    Ok(Manufactured::new("algebraic", exponential_operator_1d()?, algebraic_solution(s, terms)))
}

/// `I_n(2) = Σ_m 1 / (m! (m+n)!)`.
pub fn bessel_i_at_two(n: usize) -> f64 {
    let mut term = 1.0 / (1..=n).map(|j| j as f64).product::<f64>();
    let mut sum = 0.0;
    for m in 0..60 {
        sum += term;
        term /= ((m + 1) * (m + 1 + n)) as f64;
    }
    sum
}

/// `exp(2 cos 3x) = I_0(2) + 2 Σ_{n>=1} I_n(2) cos 3nx`, kept for `n <= terms`, with a tail bound.
pub fn exp_cos_sigma(terms: usize) -> Result<CoefficientSpectrum> {
    let cos_terms: Vec<(MultiIndex, f64)> = (1..=terms)
        .map(|n| (MultiIndex::scalar(3 * n as i64), 2.0 * bessel_i_at_two(n)))
        .collect();
    let n1 = (terms + 1) as f64;
    let factorial: f64 = (1..=terms + 1).map(|j| j as f64).product();
    let tail = 2.0 * 1f64.exp() / (factorial * (1.0 - 1.0 / (n1 + 1.0)));
    Ok(CoefficientSpectrum::trig(1, bessel_i_at_two(0), &cos_terms, &[])?.with_tail_bound(tail))
}

/// `ν = 1 + sin(3x)/2`, `σ = exp(2 cos 3x)`, `u = exp(cos 2x + sin x)` truncated to `|k| <= 40`.
pub fn figure_problem() -> Result<Manufactured> {
    let nu = CoefficientSpectrum::trig(1, 1.0, &[], &[(MultiIndex::scalar(3), 0.5)])?;
    let sigma = exp_cos_sigma(12)?;
    let op = EllipticOperator::new(nu, sigma)?;
    let u = CoefficientSpectrum::from_function(1, 40, 256, |x| (x[0] * 2.0).cos().exp() * x[0].sin().exp())?;
    let exact = SpectralVector::from_fourier(1, Normalization::H1, u.iter().map(|(k, c)| (k.clone(), *c)));
    Ok(Manufactured::new("figure", op, exact))
}

/// `u(x) = exp(cos 2x + sin x)`.
pub fn figure_solution(x: f64) -> f64 {
    (2.0 * x).cos().exp() * x.sin().exp()
}

/// Plain Fourier coefficients `(1/2π) ∫ u e^{-ikx}` of [`figure_solution`], `|k| <= degree`.
pub fn figure_solution_modes(degree: i64) -> Vec<(i64, Complex64)> {
    let m = 256;
    (-degree..=degree)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..m {
                let x = 2.0 * PI * j as f64 / m as f64;
                acc += Complex64::from_polar(figure_solution(x), -(k as f64) * x);
            }
            (k, acc / m as f64)
        })
        .collect()
}
