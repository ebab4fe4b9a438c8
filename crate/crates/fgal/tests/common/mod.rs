#![allow(dead_code)]

use fgal::operator::{basis_scale, CoefficientSpectrum, EllipticOperator};
use fgal::spectral_core::{MultiIndex, Normalization, SpectralVector};
use fgal::Complex64;
use proptest::prelude::*;

/// Hermitian spectrum `c0 + Σ_{0<|h|<=radius} a_h e^{ih·x}` with plain coefficients
/// `a_h = amp · w_h · e^{-rate|h|}`, where `w_{-h} = conj(w_h)`.
pub fn hermitian_spectrum(d: usize, c0: f64, amp: f64, rate: f64, radius: f64, seeds: &[f64]) -> CoefficientSpectrum {
    let s = 1.0 / basis_scale(d);
    let ball = MultiIndex::ball(d, radius);
    let mut entries = vec![(MultiIndex::zero(d), Complex64::new(c0 * s, 0.0))];
    let mut i = 0;
    for h in &ball {
        if h.is_zero() || h.neg() < *h {
            continue;
        }
        let re = seeds[i % seeds.len()];
        let im = seeds[(i + 1) % seeds.len()];
        i += 2;
        let a = Complex64::new(re, im) * amp * (-rate * h.norm()).exp();
        entries.push((h.clone(), a * s));
        entries.push((h.neg(), a.conj() * s));
    }
    CoefficientSpectrum::new(d, entries).expect("hermitian spectrum")
}

/// A coercive operator whose off-mean coefficients are at most `0.25` of the means.
pub fn random_operator(d: usize, seeds: &[f64], rate: f64) -> EllipticOperator {
    let radius = if d == 1 { 6.0 } else { 3.0 };
    let nu = hermitian_spectrum(d, 1.0, 0.2, rate, radius, seeds);
    let sigma = hermitian_spectrum(d, 1.5, 0.2, rate, radius, &seeds.iter().rev().copied().collect::<Vec<_>>());
    EllipticOperator::new(nu, sigma).expect("coercive operator")
}

pub fn operator_strategy(d: usize) -> impl Strategy<Value = EllipticOperator> {
    (prop::collection::vec(-1.0f64..1.0, 16), 0.5f64..2.0).prop_map(move |(s, r)| random_operator(d, &s, r))
}

pub fn vector_1d(norm: Normalization, max_len: usize) -> impl Strategy<Value = SpectralVector> {
    prop::collection::vec((-40i64..40, -1.0f64..1.0, -1.0f64..1.0), 1..max_len).prop_map(move |entries| {
        SpectralVector::from_entries(
            1,
            norm,
            entries.into_iter().map(|(k, re, im)| (MultiIndex::scalar(k), Complex64::new(re, im))),
        )
    })
}

pub fn vector_2d(norm: Normalization, max_len: usize) -> impl Strategy<Value = SpectralVector> {
    prop::collection::vec((-8i64..8, -8i64..8, -1.0f64..1.0, -1.0f64..1.0), 1..max_len).prop_map(
        move |entries| {
            SpectralVector::from_entries(
                2,
                norm,
                entries.into_iter().map(|(a, b, re, im)| (MultiIndex::new(&[a, b]), Complex64::new(re, im))),
            )
        },
    )
}

/// `Σ_k |v_k|^2`, recomputed from the entries.
pub fn norm_sq_oracle(v: &SpectralVector) -> f64 {
    v.iter().map(|(_, c)| c.norm_sqr()).sum()
}
