//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line and
//! the process exits nonzero if any criterion fails.

use std::time::Instant;

use fgal::adaptivity::dorfler;
use fgal::algorithms::{
    check_cardinality_bounds, run, AlgorithmConfig, Reference, RunTrace, Variant,
    CONTRACTION_SLACK,
};
use fgal::lab::fixtures::coarsening_support_ratio;
use fgal::lab::problems::{
    algebraic_problem, exponential_problem, figure_problem, manufactured_1d, manufactured_2d, Manufactured,
};
use fgal::lab::{fixture, FixtureOutput, Params};
use fgal::operator::{
    basis_scale, certify_decay, hermitian_norm, inverse_decay_rate, CoefficientSpectrum, DecayKind,
    EllipticOperator, InverseDecay, TruncationModel,
};
use fgal::sparsity::{fit_class, ClassKind, ClassParams};
use fgal::spectral_core::{IndexSet, MultiIndex, Normalization, SpectralVector};
use fgal::Complex64;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

fn failed_facts(out: &FixtureOutput) -> Vec<String> {
    out.failures().iter().map(|f| format!("{} ({})", f.id, f.observed)).collect()
}

// ---------------------------------------------------------------------------

fn contraction_violations(trace: &RunTrace) -> Vec<(usize, f64)> {
    let e0 = trace.records[0].energy_error.unwrap_or(0.0);
    trace
        .records
        .windows(2)
        .filter_map(|w| {
            let prev = w[0].energy_error?;
            let next = w[1].energy_error?;
            if prev <= 1e-11 * e0 {
                return None;
            }
            let ratio = next / prev;
            (ratio > trace.predicted_factor * (1.0 + CONTRACTION_SLACK)).then_some((w[1].iter, ratio))
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let mut problems: Vec<Manufactured> = Vec::new();
    for p in [manufactured_1d(), manufactured_2d()] {
        match p {
            Ok(p) => problems.push(p),
            Err(e) => return Outcome::new(false, format!("problem setup: {e}")),
        }
    }
    let mut runs = 0;
    let mut failures = Vec::new();
    for m in &problems {
        let tol = 1e-9 * m.problem.f.norm();
        for variant in Variant::ALL {
            for theta in [0.3, 0.6, 0.9] {
                let mut config = AlgorithmConfig::new(variant, theta, tol)
                    .with_max_iter(40)
                    .with_reference(Reference::Exact(m.exact.clone()));
                if variant == Variant::FAdfour {
                    config = config.with_gamma(theta / 3.0);
                }
                runs += 1;
                match run(&m.problem, &config) {
                    Ok(trace) => {
                        let bad = contraction_violations(&trace);
                        if !bad.is_empty() {
                            failures.push(format!(
                                "{} {variant} θ={theta}: factor {:.4} exceeded at {:?}",
                                m.name, trace.predicted_factor, bad
                            ));
                        }
                    }
                    Err(e) => failures.push(format!("{} {variant} θ={theta}: {e}", m.name)),
                }
            }
        }
    }
    if failures.is_empty() {
        Outcome::new(true, format!("{runs} runs, every ratio within its predicted factor"))
    } else {
        Outcome::new(false, failures.join("; "))
    }
}

// ---------------------------------------------------------------------------

/// `log r` of a piecewise log-linear curve through `(card, residual)` at `card = c`.
fn interpolate_log(curve: &[(f64, f64)], c: f64) -> Option<f64> {
    curve.windows(2).find_map(|w| {
        let (c0, r0) = w[0];
        let (c1, r1) = w[1];
        if c < c0 || c > c1 {
            return None;
        }
        if c1 == c0 {
            return Some(r0.ln().min(r1.ln()));
        }
        let t = (c - c0) / (c1 - c0);
        Some((1.0 - t) * r0.ln() + t * r1.ln())
    })
}

fn criterion_2() -> Outcome {
    let m = match figure_problem() {
        Ok(m) => m,
        Err(e) => return Outcome::new(false, format!("problem setup: {e}")),
    };
    let thetas = [0.9, 0.99, 0.999];
    let mut curves = Vec::new();
    let mut iterations = Vec::new();
    for theta in thetas {
        let config = AlgorithmConfig::new(Variant::Adfour, theta, 1e-10).with_max_iter(200);
        match run(&m.problem, &config) {
            Ok(t) => {
                iterations.push(t.iterations());
                let curve: Vec<(f64, f64)> = t
                    .records
                    .iter()
                    .filter(|r| r.residual_norm > 0.0)
                    .map(|r| (r.card_lambda as f64, r.residual_norm))
                    .collect();
                curves.push(curve);
            }
            Err(e) => return Outcome::new(false, format!("θ={theta}: {e}")),
        }
    }
    let mut worst: f64 = 1.0;
    let mut compared = 0;
    for a in 0..curves.len() {
        for b in 0..curves.len() {
            if a == b {
                continue;
            }
            for &(c, r) in &curves[a] {
                if let Some(lb) = interpolate_log(&curves[b], c) {
                    compared += 1;
                    worst = worst.max((r.ln() - lb).abs().exp());
                }
            }
        }
    }
    let decreasing = iterations.windows(2).all(|w| w[0] > w[1]);
    Outcome::new(
        decreasing && worst <= 2.0 && compared > 0,
        format!(
            "iterations {:?} for θ = {:?}; worst pairwise residual ratio {:.3} over {compared} matched points",
            iterations, thetas, worst
        ),
    )
}

// ---------------------------------------------------------------------------

/// Smallest cardinality of a subset of the candidates meeting the bulk condition.
fn brute_force_minimum(moduli_sq: &[f64], total: f64, theta: f64) -> usize {
    let n = moduli_sq.len();
    let mut best = usize::MAX;
    for mask in 0u32..(1 << n) {
        let card = mask.count_ones() as usize;
        if card >= best {
            continue;
        }
        let captured: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| moduli_sq[i]).sum();
        if captured >= theta * theta * total * (1.0 - 1e-12) {
            best = card;
        }
    }
    best
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cases = 0;
    let mut failures = Vec::new();
    for size in 1..=12usize {
        for _ in 0..40 {
            let ties = rng.gen_bool(0.3);
            let entries: Vec<(i64, f64)> = (0..size as i64)
                .map(|k| {
                    let m = if ties { rng.gen_range(1..4) as f64 } else { rng.gen_range(0.01..1.0) };
                    (k - 6, m)
                })
                .collect();
            let exclude: IndexSet = entries
                .iter()
                .filter(|_| rng.gen_bool(0.2))
                .map(|(k, _)| MultiIndex::scalar(*k))
                .collect();
            let r = SpectralVector::from_real_1d(Normalization::HMinus1, &entries);
            let theta = rng.gen_range(0.05..0.99);
            let candidates: Vec<f64> = entries
                .iter()
                .filter(|(k, _)| !exclude.contains(&MultiIndex::scalar(*k)))
                .map(|(_, m)| m * m)
                .collect();
            let total: f64 = candidates.iter().sum();
            let marked = match dorfler(&r, theta, &exclude) {
                Ok(s) => s,
                Err(e) => return Outcome::new(false, format!("dorfler: {e}")),
            };
            cases += 1;
            let captured = r.project(&marked).norm_sq();
            let expected = if total == 0.0 { 0 } else { brute_force_minimum(&candidates, total, theta) };
            let ok = marked.is_disjoint(&exclude)
                && marked.len() == expected
                && (total == 0.0 || captured >= theta * theta * total * (1.0 - 1e-12));
            if !ok {
                failures.push(format!("size {size} θ={theta:.3}: marked {} expected {expected}", marked.len()));
            }
        }
    }
    for k in [10u64, 100, 1000] {
        for (theta, num) in [(0.5, 25u64), (0.9, 81)] {
            let expected = (num * k).div_ceil(100) as usize;
            let r = SpectralVector::from_real_1d(
                Normalization::HMinus1,
                &(0..k as i64).map(|i| (i, 1.0)).collect::<Vec<_>>(),
            );
            let marked = dorfler(&r, theta, &IndexSet::new()).map(|s| s.len()).unwrap_or(0);
            if marked != expected {
                failures.push(format!("plateau K={k} θ={theta}: {marked} != {expected}"));
            }
        }
    }
    if failures.is_empty() {
        Outcome::new(true, format!("{cases} random residuals minimal; 6 plateau counts exact"))
    } else {
        Outcome::new(false, failures.join("; "))
    }
}

// ---------------------------------------------------------------------------

fn run_fixtures(runs: &[(&str, Params)]) -> (Vec<String>, usize) {
    let mut failures = Vec::new();
    let mut facts = 0;
    for (name, params) in runs {
        match fixture(name, params) {
            Ok(out) => {
                facts += out.facts.len();
                for f in failed_facts(&out) {
                    failures.push(format!("{name}: {f}"));
                }
            }
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    (failures, facts)
}

fn fixture_outcome(runs: &[(&str, Params)]) -> Outcome {
    let (failures, facts) = run_fixtures(runs);
    if failures.is_empty() {
        Outcome::new(true, format!("{facts} facts hold"))
    } else {
        Outcome::new(false, failures.join("; "))
    }
}

fn criterion_4() -> Outcome {
    let mut runs = Vec::new();
    for theta in [0.5, 0.9] {
        for eta in [0.5, 1.0] {
            runs.push((
                "genuine_decay",
                Params::new().set("kind", "exponential").set("theta", theta).set("eta", eta),
            ));
        }
        for s in [0.5, 1.0] {
            runs.push(("genuine_decay", Params::new().set("kind", "algebraic").set("theta", theta).set("s", s)));
        }
    }
    fixture_outcome(&runs)
}

fn criterion_5() -> Outcome {
    let mut runs = Vec::new();
    for (p, q) in [(3, 1), (5, 2), (8, 3)] {
        runs.push(("gap_algebraic", Params::new().set("p", p).set("q", q)));
        runs.push(("gap_exponential", Params::new().set("p", p).set("q", q)));
    }
    fixture_outcome(&runs)
}

fn criterion_6() -> Outcome {
    fixture_outcome(&[
        ("banded_counterexample", Params::new().set("p", 2)),
        ("banded_counterexample", Params::new().set("p", 3)),
        ("dense_counterexample", Params::new()),
    ])
}

fn criterion_7() -> Outcome {
    let epsilons = [1e-2, 1e-3, 1e-4];
    let runs: Vec<(&str, Params)> =
        epsilons.iter().map(|e| ("coarsening_example", Params::new().set("p", 8).set("eps", e))).collect();
    let (mut failures, facts) = run_fixtures(&runs);
    let ratios: Vec<f64> = epsilons.iter().filter_map(|&e| coarsening_support_ratio(8, 1.0, e, 25).ok()).collect();
    let grows = ratios.len() == 3 && ratios.windows(2).all(|w| w[1] > w[0]);
    let approaches = ratios.len() == 3 && (ratios[2] - 8.0).abs() < (ratios[0] - 8.0).abs();
    if !(grows && approaches) {
        failures.push(format!("support ratio does not grow toward p = 8: {ratios:.3?}"));
    }
    let detail = format!("{facts} facts; support ratios {ratios:.3?} for ε = {epsilons:?}");
    if failures.is_empty() {
        Outcome::new(true, detail)
    } else {
        Outcome::new(false, format!("{detail}; {}", failures.join("; ")))
    }
}

// ---------------------------------------------------------------------------

/// Real even spectrum `c0 + Σ_{0<|h|<=degree} a_h e^{ihx}` in plain coefficients.
fn plain_spectrum(c0: f64, coeffs: &[f64]) -> CoefficientSpectrum {
    let s = 1.0 / basis_scale(1);
    let mut entries = vec![(MultiIndex::scalar(0), Complex64::new(c0 * s, 0.0))];
    for (i, a) in coeffs.iter().enumerate() {
        let h = i as i64 + 1;
        entries.push((MultiIndex::scalar(h), Complex64::new(a * s, 0.0)));
        entries.push((MultiIndex::scalar(-h), Complex64::new(a * s, 0.0)));
    }
    CoefficientSpectrum::new(1, entries).expect("valid spectrum")
}

fn random_exponential_operator(rng: &mut ChaCha8Rng) -> (EllipticOperator, f64) {
    let degree = 24;
    let eta = rng.gen_range(0.8..2.0);
    let limit = 0.5 * (f64::exp(eta) - 1.0);
    let scale = rng.gen_range(0.1..0.8) * limit;
    let split = rng.gen_range(0.2..0.8);
    let mut draw = |amp: f64| -> Vec<f64> {
        (1..=degree)
            .map(|h| {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                sign * amp * rng.gen_range(0.3..1.0) * (-eta * h as f64).exp()
            })
            .collect()
    };
    let nu = draw(scale * split);
    let sigma = draw(scale * (1.0 - split));
    let sigma0 = rng.gen_range(1.0..3.0);
    let op = EllipticOperator::new(plain_spectrum(1.0, &nu), plain_spectrum(sigma0, &sigma)).expect("coercive");
    (op, eta)
}

/// Least-squares rate of `max |(A^{-1})_{ℓk}|` over `|ℓ - k| = r`, using radii
/// where the envelope is above `1e-12` of its peak.
fn fitted_inverse_rate(op: &EllipticOperator, half_width: i64) -> f64 {
    let indices: Vec<MultiIndex> = (-half_width..=half_width).map(MultiIndex::scalar).collect();
    let n = indices.len();
    let a = op.assemble(&indices);
    let inv = a.try_inverse().expect("invertible window");
    let mut env = vec![0.0f64; n];
    for i in 0..n {
        for j in 0..n {
            let r = i.abs_diff(j);
            env[r] = env[r].max(inv[(i, j)].norm());
        }
    }
    let peak = env[0];
    let pts: Vec<(f64, f64)> = (1..n).filter(|&r| env[r] > 1e-12 * peak).map(|r| (r as f64, env[r].ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    -sxy / sxx
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut accepted = 0;
    let mut attempts = 0;
    let mut failures = Vec::new();
    let mut margin = f64::INFINITY;
    while accepted < 20 && attempts < 200 {
        attempts += 1;
        let (op, _) = random_exponential_operator(&mut rng);
        let cert = match certify_decay(&op, 32) {
            Ok(c) => c,
            Err(e) => return Outcome::new(false, format!("certify: {e}")),
        };
        if cert.kind != DecayKind::Exponential {
            continue;
        }
        let eta_bar = match inverse_decay_rate(cert.c_l, cert.eta_l, cert.diag_min) {
            Ok(InverseDecay::Accepted { eta_bar, .. }) => eta_bar,
            Ok(InverseDecay::Rejected { .. }) => continue,
            Err(e) => return Outcome::new(false, format!("inverse rate: {e}")),
        };
        accepted += 1;
        let rate = fitted_inverse_rate(&op, 200);
        margin = margin.min(rate - eta_bar);
        if rate < eta_bar - 0.02 {
            failures.push(format!("fitted {rate:.4} < η̄ {eta_bar:.4} - 0.02"));
        }
    }
    if accepted < 20 {
        failures.push(format!("only {accepted} admissible operators in {attempts} draws"));
    }
    let toeplitz = fixture("singular_toeplitz", &Params::new());
    match toeplitz {
        Ok(out) => failures.extend(failed_facts(&out).into_iter().map(|f| format!("singular_toeplitz: {f}"))),
        Err(e) => failures.push(format!("singular_toeplitz: {e}")),
    }
    let detail = format!("{accepted} operators, min (fitted - η̄) = {margin:.4}");
    if failures.is_empty() {
        Outcome::new(true, detail)
    } else {
        Outcome::new(false, format!("{detail}; {}", failures.join("; ")))
    }
}

// ---------------------------------------------------------------------------

fn algebraic_operator() -> EllipticOperator {
    let coeffs = |amp: f64| -> Vec<f64> {
        (1..=60).map(|h| amp * (1.0 + h as f64).powf(-4.0) * if h % 2 == 0 { 1.0 } else { -1.0 }).collect()
    };
    EllipticOperator::new(plain_spectrum(1.0, &coeffs(0.8)), plain_spectrum(1.5, &coeffs(0.4))).expect("coercive")
}

fn exponential_operator() -> EllipticOperator {
    fgal::lab::problems::exponential_operator_1d().expect("operator")
}

fn criterion_9() -> Outcome {
    let indices: Vec<MultiIndex> = (-100..=100).map(MultiIndex::scalar).collect();
    let mut failures = Vec::new();
    let mut kinds = Vec::new();
    let mut tightest = f64::INFINITY;
    for (label, op) in [("algebraic", algebraic_operator()), ("exponential", exponential_operator())] {
        let cert = match certify_decay(&op, 32) {
            Ok(c) => c,
            Err(e) => return Outcome::new(false, format!("{label}: {e}")),
        };
        kinds.push(format!("{label}: certified {}", cert.kind));
        let expected_kind = if label == "algebraic" { DecayKind::Algebraic } else { DecayKind::Exponential };
        if cert.kind != expected_kind {
            failures.push(format!("{label} operator certified as {}", cert.kind));
        }
        let model = match TruncationModel::from_certificate(&cert, 1) {
            Ok(m) => m,
            Err(e) => return Outcome::new(false, format!("{label}: {e}")),
        };
        let full = op.assemble(&indices);
        for j in 0..=20usize {
            let diff: DMatrix<Complex64> = &full - op.truncate(j).assemble(&indices);
            let measured = hermitian_norm(&diff);
            let psi = model.psi(j);
            if measured > 0.0 {
                tightest = tightest.min(psi / measured);
            }
            if measured > psi {
                failures.push(format!("{label} J={j}: ‖A-A_J‖ = {measured:.4e} > ψ = {psi:.4e}"));
            }
        }
    }
    let detail = format!("{}; min ψ/measured = {tightest:.3}", kinds.join(", "));
    if failures.is_empty() {
        Outcome::new(true, detail)
    } else {
        Outcome::new(false, format!("{detail}; {}", failures.join("; ")))
    }
}

// ---------------------------------------------------------------------------

fn criterion_10() -> Outcome {
    let mut failures = Vec::new();
    let alg = match algebraic_problem(1.0, 4000) {
        Ok(m) => m,
        Err(e) => return Outcome::new(false, format!("setup: {e}")),
    };
    let config = AlgorithmConfig::new(Variant::Adfour, 0.5, 0.0)
        .with_max_iter(15)
        .with_reference(Reference::Exact(alg.exact.clone()));
    let growth = match (run(&alg.problem, &config), fit_class(&alg.exact, ClassKind::Algebraic)) {
        (Ok(trace), Ok(fit)) => {
            let s = match fit.params {
                ClassParams::Algebraic(a) => a.s,
                ClassParams::Exponential(_) => f64::NAN,
            };
            let report = check_cardinality_bounds(&trace, &fit, trace.alpha_star, trace.alpha_upper);
            if trace.iterations() < 15 {
                failures.push(format!("algebraic run stopped after {} iterations", trace.iterations()));
            }
            if !(report.growth < 2.0) {
                failures.push(format!("implied C_* varies by {:.3}", report.growth));
            }
            format!("algebraic: fitted s = {s:.4}, C_* growth {:.3}", report.growth)
        }
        (Err(e), _) | (_, Err(e)) => return Outcome::new(false, format!("algebraic: {e}")),
    };
    let exp = match exponential_problem() {
        Ok(m) => m,
        Err(e) => return Outcome::new(false, format!("setup: {e}")),
    };
    let config = AlgorithmConfig::new(Variant::CAdfour, 0.9, 1e-10 * exp.problem.f.norm())
        .with_max_iter(60)
        .with_reference(Reference::Exact(exp.exact.clone()));
    let log_c = match (run(&exp.problem, &config), fit_class(&exp.exact, ClassKind::Exponential)) {
        (Ok(trace), Ok(fit)) => {
            let report = check_cardinality_bounds(&trace, &fit, trace.alpha_star, trace.alpha_upper);
            match report.fitted_log_c {
                Some(c) if c <= 5.0 => format!("exponential: fitted log C = {c:.4}"),
                Some(c) => {
                    failures.push(format!("fitted log C = {c:.4} > 5"));
                    format!("exponential: fitted log C = {c:.4}")
                }
                None => {
                    failures.push("no fitted log C".into());
                    "exponential: no fit".into()
                }
            }
        }
        (Err(e), _) | (_, Err(e)) => return Outcome::new(false, format!("exponential: {e}")),
    };
    let detail = format!("{growth}; {log_c}");
    if failures.is_empty() {
        Outcome::new(true, detail)
    } else {
        Outcome::new(false, format!("{detail}; {}", failures.join("; ")))
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("contraction", criterion_1),
        ("theta_sweep", criterion_2),
        ("dorfler_exactness", criterion_3),
        ("marking_cardinality", criterion_4),
        ("gap_fixtures", criterion_5),
        ("counterexamples", criterion_6),
        ("coarsening", criterion_7),
        ("inverse_decay", criterion_8),
        ("truncation_bounds", criterion_9),
        ("optimality_diagnostics", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "CRITERION {:>2} {name}: {} ({secs:.1}s) {}",
            i + 1,
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    println!("acceptance: {} failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
