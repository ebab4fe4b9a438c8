use fgal::adaptivity::{coarse, dorfler, e_dorfler, enrich, select_enrichment_radius};
use fgal::operator::{DecayKind, TruncationModel};
use fgal::spectral_core::{IndexSet, MultiIndex, Normalization, SpectralVector};
use fgal::Complex64;
use proptest::prelude::*;

fn residual_strategy(max: usize) -> impl Strategy<Value = Vec<(i64, f64, f64)>> {
    prop::collection::btree_map(-20i64..20, (-1.0f64..1.0, -1.0f64..1.0), 1..max)
        .prop_map(|m| m.into_iter().map(|(k, (a, b))| (k, a, b)).collect())
}

fn build(entries: &[(i64, f64, f64)], norm: Normalization) -> SpectralVector {
    SpectralVector::from_entries(1, norm, entries.iter().map(|&(k, a, b)| (MultiIndex::scalar(k), Complex64::new(a, b))))
}

/// Minimal cardinality of a subset of `moduli_sq` capturing `θ^2` of their sum.
fn minimal_bulk(moduli_sq: &[f64], theta: f64) -> usize {
    let total: f64 = moduli_sq.iter().sum();
    let n = moduli_sq.len();
    (0u32..(1 << n))
        .filter(|mask| {
            let s: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| moduli_sq[i]).sum();
            s >= theta * theta * total * (1.0 - 1e-12)
        })
        .map(|mask| mask.count_ones() as usize)
        .min()
        .unwrap_or(0)
}

proptest! {
    #[test]
    fn dorfler_is_minimal(entries in residual_strategy(11), theta in 0.05f64..0.99, skip in prop::collection::vec(any::<bool>(), 11)) {
        let r = build(&entries, Normalization::HMinus1);
        let exclude: IndexSet = entries.iter().zip(&skip).filter(|(_, s)| **s).map(|((k, _, _), _)| MultiIndex::scalar(*k)).collect();
        let marked = dorfler(&r, theta, &exclude).unwrap();
        prop_assert!(marked.is_disjoint(&exclude));
        let rest = r.project_complement(&exclude);
        let moduli_sq: Vec<f64> = rest.iter().map(|(_, c)| c.norm_sqr()).collect();
        prop_assert_eq!(marked.len(), minimal_bulk(&moduli_sq, theta));
        if rest.norm_sq() > 0.0 {
            prop_assert!(r.project(&marked).norm_sq() >= theta * theta * rest.norm_sq() * (1.0 - 1e-12));
        }
    }

    #[test]
    fn dorfler_grows_with_theta(entries in residual_strategy(30), a in 0.05f64..0.99, b in 0.05f64..0.99) {
        let r = build(&entries, Normalization::HMinus1);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let small = dorfler(&r, lo, &IndexSet::new()).unwrap();
        let large = dorfler(&r, hi, &IndexSet::new()).unwrap();
        prop_assert!(small.len() <= large.len());
    }

    #[test]
    fn enrich_is_neighborhood(ks in prop::collection::btree_set(-30i64..30, 1..10), j in 0usize..5) {
        let set: IndexSet = ks.iter().copied().map(MultiIndex::scalar).collect();
        let grown = enrich(&set, j);
        let expected: IndexSet = ks
            .iter()
            .flat_map(|&k| (-(j as i64)..=j as i64).map(move |h| MultiIndex::scalar(k + h)))
            .collect();
        prop_assert_eq!(grown, expected);
    }

    #[test]
    fn e_dorfler_contains_dorfler(entries in residual_strategy(20), theta in 0.1f64..0.95, j in 0usize..3) {
        let r = build(&entries, Normalization::HMinus1);
        let plain = dorfler(&r, theta, &IndexSet::new()).unwrap();
        let grown = e_dorfler(&r, theta, j, &IndexSet::new()).unwrap();
        prop_assert!(plain.is_subset(&grown));
        prop_assert_eq!(grown, enrich(&plain, j));
    }

    #[test]
    fn coarse_is_accurate_and_minimal(entries in residual_strategy(30), frac in 0.001f64..0.6) {
        let w = build(&entries, Normalization::H1);
        let eps = frac * w.norm();
        let kept = coarse(&w, eps).unwrap();
        prop_assert!(kept.is_subset(&w.support()));
        prop_assert!(w.sub(&w.project(&kept)).norm() <= 2.0 * eps * (1.0 + 1e-12));
        if !kept.is_empty() {
            // Dropping the smallest kept entry as well must break the tolerance.
            let mut m: Vec<f64> = w.iter().map(|(_, c)| c.norm()).collect();
            m.sort_by(|a, b| b.total_cmp(a));
            let tail: f64 = m.iter().skip(kept.len() - 1).map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(tail > 2.0 * eps);
        }
    }

    #[test]
    fn coarse_keeps_three_epsilon_accuracy(entries in residual_strategy(30), noise in prop::collection::vec(-1.0f64..1.0, 30), frac in 0.01f64..0.5) {
        let u = build(&entries, Normalization::H1);
        let eps = frac * u.norm();
        let raw = build(&entries.iter().zip(&noise).map(|(&(k, _, _), &n)| (k, n, 0.0)).collect::<Vec<_>>(), Normalization::H1);
        prop_assume!(raw.norm() > 0.0);
        let w = u.axpy(Complex64::new(eps / raw.norm(), 0.0), &raw);
        prop_assert!(u.sub(&w).norm() <= eps * (1.0 + 1e-12));
        let kept = coarse(&w, eps).unwrap();
        prop_assert!(u.sub(&w.project(&kept)).norm() <= 3.0 * eps * (1.0 + 1e-12));
    }

    #[test]
    fn enrichment_radius_is_smallest(theta in 0.1f64..0.99, c in 0.1f64..10.0, eta in 0.2f64..3.0) {
        let model = TruncationModel::new(DecayKind::Exponential, eta, c, 1).unwrap();
        let (a_lo, a_hi) = (0.8, 1.6);
        let j = select_enrichment_radius(theta, &model, a_lo, a_hi).unwrap();
        let target = ((1.0 - theta * theta) / (a_lo * a_hi)).sqrt();
        prop_assert!(model.psi(j) <= target);
        if j > 0 {
            prop_assert!(model.psi(j - 1) > target);
        }
    }
}

#[test]
fn plateau_counts() {
    for k in [10u64, 100, 1000] {
        let r = SpectralVector::from_real_1d(Normalization::HMinus1, &(0..k as i64).map(|i| (i, 1.0)).collect::<Vec<_>>());
        for (theta, percent) in [(0.5, 25u64), (0.9, 81), (0.3, 9)] {
            let expected = (percent * k).div_ceil(100) as usize;
            assert_eq!(dorfler(&r, theta, &IndexSet::new()).unwrap().len(), expected, "K = {k}, θ = {theta}");
        }
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    let r = SpectralVector::from_real_1d(Normalization::HMinus1, &[(0, 1.0)]);
    assert!(dorfler(&r, 0.0, &IndexSet::new()).is_err());
    assert!(dorfler(&r, 1.0, &IndexSet::new()).is_err());
    assert!(coarse(&r, 0.0).is_err());
    assert!(dorfler(&r, 0.5, &r.support()).unwrap().is_empty());
}
