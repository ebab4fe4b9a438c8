mod common;

use common::vector_1d;
use fgal::sparsity::{
    algebraic_quasinorm, best_n_error, best_n_errors, class_norm, exponential_norm, fit_class, min_dofs,
    AlgebraicClassParams, ClassKind, ClassParams, ExponentialClassParams,
};
use fgal::spectral_core::{Normalization, SpectralVector};
use fgal::Complex64;
use proptest::prelude::*;

fn sequence(values: &[f64]) -> SpectralVector {
    let entries: Vec<(i64, f64)> = values.iter().enumerate().map(|(i, &v)| (3 * i as i64 - 50, v)).collect();
    SpectralVector::from_real_1d(Normalization::H1, &entries)
}

/// `E_N` by sorting moduli and summing the discarded tail directly.
fn best_n_oracle(v: &SpectralVector, n: usize) -> f64 {
    let mut m: Vec<f64> = v.iter().map(|(_, c)| c.norm()).collect();
    m.sort_by(|a, b| b.total_cmp(a));
    m.iter().skip(n).map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn best_n_errors_match_oracle(v in vector_1d(Normalization::H1, 50)) {
        let errs = best_n_errors(&v);
        prop_assert!((errs[0] - v.norm()).abs() <= 1e-12 * v.norm().max(1.0));
        prop_assert!(errs.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        for (n, e) in errs.iter().enumerate() {
            prop_assert!((e - best_n_oracle(&v, n)).abs() <= 1e-10 * v.norm().max(1.0));
            prop_assert!((best_n_error(&v, n) - e).abs() <= 1e-12 * v.norm().max(1.0));
        }
    }

    #[test]
    fn algebraic_quasinorm_is_homogeneous(v in vector_1d(Normalization::H1, 40), c in 0.1f64..10.0, s in 0.2f64..3.0) {
        let p = AlgebraicClassParams::new(s, 1).unwrap();
        let scaled = v.scale(Complex64::new(c, 0.0));
        let a = algebraic_quasinorm(&v, &p);
        prop_assert!((algebraic_quasinorm(&scaled, &p) - c * a).abs() <= 1e-10 * c * a);
    }

    #[test]
    fn algebraic_profile_has_unit_quasinorm(s in 0.2f64..3.0, n in 10usize..200) {
        let p = AlgebraicClassParams::new(s, 1).unwrap();
        let v = sequence(&(1..=n).map(|j| (j as f64).powf(-(s + 0.5))).collect::<Vec<_>>());
        prop_assert!((algebraic_quasinorm(&v, &p) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn exponential_profile_has_unit_norm(eta in 0.2f64..3.0, n in 10usize..150) {
        // With τ = 1 and ω_1 = 2 the profile is exp(-η n / 2).
        let p = ExponentialClassParams::new(eta, 1.0, 1).unwrap();
        let v = sequence(&(1..=n).map(|j| (-eta * j as f64 / 2.0).exp()).collect::<Vec<_>>());
        prop_assert!((exponential_norm(&v, &p) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn min_dofs_reaches_accuracy(s in 0.3f64..2.0, eps in 1e-4f64..0.5) {
        let n = 4000;
        let v = sequence(&(1..=n).map(|j| (j as f64).powf(-(s + 0.5))).collect::<Vec<_>>());
        let params = ClassParams::Algebraic(AlgebraicClassParams::new(s, 1).unwrap());
        let norm = class_norm(&v, &params);
        let dofs = min_dofs(norm, eps, &params).unwrap();
        prop_assume!(dofs < n);
        prop_assert!(best_n_error(&v, dofs) <= eps * (1.0 + 1e-12));
    }
}

#[test]
fn fit_recovers_algebraic_rate() {
    for s in [0.5, 1.0, 2.0] {
        let v = sequence(&(1..=2000).map(|j| (j as f64).powf(-(s + 0.5))).collect::<Vec<_>>());
        let fit = fit_class(&v, ClassKind::Algebraic).unwrap();
        match fit.params {
            ClassParams::Algebraic(a) => assert!((a.s - s).abs() < 0.02, "s = {s}, fitted {}", a.s),
            ClassParams::Exponential(_) => panic!("wrong kind"),
        }
        assert!(fit.r2 > 0.99);
    }
}

#[test]
fn fit_recovers_exponential_rate() {
    for eta in [0.3, 1.0, 2.0] {
        let v = sequence(&(1..=30).map(|j| (-eta * j as f64 / 2.0).exp()).collect::<Vec<_>>());
        let fit = fit_class(&v, ClassKind::Exponential).unwrap();
        match fit.params {
            ClassParams::Exponential(e) => {
                assert!((e.t - 1.0).abs() < 0.05, "t = {}", e.t);
                assert!((e.eta - eta).abs() < 0.05 * eta, "η = {eta}, fitted {}", e.eta);
            }
            ClassParams::Algebraic(_) => panic!("wrong kind"),
        }
    }
}

#[test]
fn too_short_sequences_cannot_be_fitted() {
    assert!(fit_class(&sequence(&[1.0, 0.5, 0.25]), ClassKind::Algebraic).is_err());
}
