//! Galerkin solves on finite index sets and residual evaluation.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{CoefficientSpectrum, EllipticOperator};
use crate::spectral_core::{IndexSet, MultiIndex, Normalization, SpectralVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Largest active set solved by dense Cholesky factorization.
    pub direct_limit: usize,
    /// Relative residual tolerance of the conjugate-gradient solver.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { direct_limit: 2048, cg_tol: 1e-10, cg_max_iter: 10_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Direct,
    ConjugateGradient,
    /// Nothing to solve (empty active set).
    Trivial,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverWork {
    pub kind: SolverKind,
    pub iterations: usize,
    pub flops: f64,
}

/// `u_Λ` together with solver diagnostics.
#[derive(Clone, Debug)]
pub struct GalerkinSolution {
    pub coefficients: SpectralVector,
    pub active: IndexSet,
    /// `‖A_Λ u_Λ - f_Λ‖ / ‖f_Λ‖` as achieved by the solver.
    pub solver_residual: f64,
    pub work: SolverWork,
}

impl GalerkinSolution {
    /// The zero function on the empty set.
    pub fn empty(dim: usize) -> Self {
        GalerkinSolution {
            coefficients: SpectralVector::new(dim, Normalization::H1),
            active: IndexSet::new(),
            solver_residual: 0.0,
            work: SolverWork { kind: SolverKind::Trivial, iterations: 0, flops: 0.0 },
        }
    }
}

/// Solves `A_Λ u_Λ = f_Λ` with the default solver settings.
pub fn solve(op: &EllipticOperator, f: &SpectralVector, set: &IndexSet) -> Result<GalerkinSolution> {
    solve_with(op, f, set, &SolverConfig::default())
}

pub fn solve_with(
    op: &EllipticOperator,
    f: &SpectralVector,
    set: &IndexSet,
    config: &SolverConfig,
) -> Result<GalerkinSolution> {
    if set.is_empty() {
        return Err(Error::Domain("Galerkin solve needs a nonempty index set".into()));
    }
    let indices: Vec<MultiIndex> = set.iter().cloned().collect();
    let n = indices.len();
    let rhs = DVector::from_iterator(n, indices.iter().map(|k| f.get(k)));
    let rhs_norm = rhs.norm();
    if n <= config.direct_limit {
        let a = op.assemble(&indices);
        let chol = a.clone().cholesky().ok_or(Error::Indefinite { size: n })?;
        let x = chol.solve(&rhs);
        let res = (&a * &x - &rhs).norm();
        let nf = n as f64;
        Ok(GalerkinSolution {
            coefficients: to_vector(op.dim(), &indices, x.as_slice()),
            active: set.clone(),
            solver_residual: if rhs_norm > 0.0 { res / rhs_norm } else { res },
            work: SolverWork {
                kind: SolverKind::Direct,
                iterations: 1,
                flops: nf * nf * nf / 3.0 + 2.0 * nf * nf,
            },
        })
    } else {
        pcg(op, &indices, set, &rhs, config)
    }
}

fn to_vector(dim: usize, indices: &[MultiIndex], values: &[Complex64]) -> SpectralVector {
    SpectralVector::from_entries(
        dim,
        Normalization::H1,
        indices.iter().cloned().zip(values.iter().copied()),
    )
}

fn pcg(
    op: &EllipticOperator,
    indices: &[MultiIndex],
    set: &IndexSet,
    rhs: &DVector<Complex64>,
    config: &SolverConfig,
) -> Result<GalerkinSolution> {
    let n = indices.len();
    let dim = op.dim();
    let diag: Vec<f64> = indices.iter().map(|k| op.entry(k, k).re).collect();
    let matvec = |x: &DVector<Complex64>| -> DVector<Complex64> {
        let v = to_vector(dim, indices, x.as_slice());
        let av = op.apply_rows(&v, set);
        DVector::from_iterator(n, indices.iter().map(|k| av.get(k)))
    };
    let precond = |r: &DVector<Complex64>| -> DVector<Complex64> {
        DVector::from_iterator(n, r.iter().zip(&diag).map(|(v, d)| v / *d))
    };
    let rhs_norm = rhs.norm();
    let mut x = DVector::from_element(n, Complex64::new(0.0, 0.0));
    if rhs_norm == 0.0 {
        return Ok(GalerkinSolution {
            coefficients: SpectralVector::new(dim, Normalization::H1),
            active: set.clone(),
            solver_residual: 0.0,
            work: SolverWork { kind: SolverKind::ConjugateGradient, iterations: 0, flops: 0.0 },
        });
    }
    let mut r = rhs.clone();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = r.dotc(&z);
    let per_iter = (n * op.offsets().count()) as f64 * 8.0;
    let mut it = 0;
    let mut rel = 1.0;
    while it < config.cg_max_iter {
        let ap = matvec(&p);
        let alpha = rz / p.dotc(&ap);
        x += &p * alpha;
        r -= &ap * alpha;
        it += 1;
        rel = r.norm() / rhs_norm;
        if rel <= config.cg_tol {
            break;
        }
        z = precond(&r);
        let rz_new = r.dotc(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = &z + &p * beta;
    }
    if rel > config.cg_tol {
        return Err(Error::NotConverged { achieved: rel, iterations: it });
    }
    Ok(GalerkinSolution {
        coefficients: to_vector(dim, indices, x.as_slice()),
        active: set.clone(),
        solver_residual: rel,
        work: SolverWork {
            kind: SolverKind::ConjugateGradient,
            iterations: it,
            flops: per_iter * it as f64,
        },
    })
}

/// Truncation radii used by a feasible residual evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationDegrees {
    pub nu: f64,
    pub sigma: f64,
    pub f: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exactness {
    Exact,
    Feasible { gamma: f64 },
}

/// Residual `r(u_Λ) = f - L u_Λ` in `H^{-1}` normalization.
#[derive(Clone, Debug)]
pub struct Residual {
    pub vector: SpectralVector,
    pub exactness: Exactness,
    /// Certified bound on `‖r - r̃‖ / ‖r̃‖`; zero for exact residuals.
    pub gamma_bound: f64,
    pub degrees: Option<TruncationDegrees>,
}

impl Residual {
    pub fn norm(&self) -> f64 {
        self.vector.norm()
    }
}

/// Exact residual `f - A u_Λ`; with an empty active set this is `f`.
pub fn residual(op: &EllipticOperator, f: &SpectralVector, sol: &GalerkinSolution) -> Residual {
    let vector = if sol.coefficients.is_empty() {
        f.clone()
    } else {
        f.sub(&op.apply(&sol.coefficients))
    };
    Residual { vector, exactness: Exactness::Exact, gamma_bound: 0.0, degrees: None }
}

/// Result of [`feasible_residual`].
#[derive(Clone, Debug)]
pub enum FeasibleOutcome {
    Residual(Residual),
    /// `r̃` vanished before the truncation bound could be met: `u_Λ` solves the problem
    /// up to the resolution of the data.
    Converged { bound: f64, degrees: TruncationDegrees },
}

/// `f` restricted to `|k| <= radius`, and the norm of the dropped part.
fn truncate_data(f: &SpectralVector, radius: f64) -> (SpectralVector, f64) {
    let inside = |k: &MultiIndex| k.norm() <= radius + 1e-12;
    let dropped: f64 = f.iter().filter(|(k, _)| !inside(k)).map(|(_, v)| v.norm_sqr()).sum();
    let kept = SpectralVector::from_entries(
        f.dim(),
        f.normalization(),
        f.iter().filter(|(k, _)| inside(k)).map(|(k, v)| (k.clone(), *v)),
    );
    (kept, dropped.sqrt())
}

fn radius_of(v: &SpectralVector) -> f64 {
    v.iter().map(|(k, _)| k.norm()).fold(0.0, f64::max)
}

/// Residual computed from truncated `ν̃`, `σ̃`, `f̃`.
///
/// Truncation radii start at 1 and the radius of the component with the largest
/// contribution to the bound
/// `‖f - f̃‖ + (‖ν - ν̃‖_∞ + ‖σ - σ̃‖_∞) ‖f‖ / α_*`
/// is doubled until the bound is at most `γ ‖r̃‖`. `f_tail` bounds the part of
/// the data not stored in `f`. The sequence of radii does not depend on `γ`.
pub fn feasible_residual(
    op: &EllipticOperator,
    f: &SpectralVector,
    f_tail: f64,
    sol: &GalerkinSolution,
    gamma: f64,
) -> Result<FeasibleOutcome> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("γ must be positive, got {gamma}")));
    }
    let max = TruncationDegrees {
        nu: op.nu().radius(),
        sigma: op.sigma().radius(),
        f: radius_of(f),
    };
    let f_norm = f.norm() + f_tail;
    let alpha = op.alpha_star();
    let mut deg = TruncationDegrees { nu: max.nu.min(1.0), sigma: max.sigma.min(1.0), f: max.f.min(1.0) };
    loop {
        let nu: CoefficientSpectrum = op.nu().truncate(deg.nu);
        let sigma: CoefficientSpectrum = op.sigma().truncate(deg.sigma);
        let (ft, dropped) = truncate_data(f, deg.f);
        let e_f = f_tail + dropped;
        let e_nu = nu.tail_bound() * f_norm / alpha;
        let e_sigma = sigma.tail_bound() * f_norm / alpha;
        let bound = e_f + e_nu + e_sigma;
        let op_t = op.with_spectra(nu, sigma);
        let rt = if sol.coefficients.is_empty() { ft } else { ft.sub(&op_t.apply(&sol.coefficients)) };
        let rn = rt.norm();
        if bound <= gamma * rn || bound == 0.0 {
            let gamma_bound = if bound == 0.0 { 0.0 } else { bound / rn };
            return Ok(FeasibleOutcome::Residual(Residual {
                vector: rt,
                exactness: if bound == 0.0 { Exactness::Exact } else { Exactness::Feasible { gamma } },
                gamma_bound,
                degrees: Some(deg),
            }));
        }
        let candidates = [
            (e_f, deg.f < max.f),
            (e_nu, deg.nu < max.nu),
            (e_sigma, deg.sigma < max.sigma),
        ];
        let pick = candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| c.1)
            .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .map(|(i, _)| i);
        let grow = |r: f64, m: f64| (2.0 * r).max(r + 1.0).min(m);
        match pick {
            Some(0) => deg.f = grow(deg.f, max.f),
            Some(1) => deg.nu = grow(deg.nu, max.nu),
            Some(_) => deg.sigma = grow(deg.sigma, max.sigma),
            None => return Ok(FeasibleOutcome::Converged { bound, degrees: deg }),
        }
    }
}

/// `η(v; Λ) = ‖P_Λ r‖`, or `‖r‖` when no set is given.
pub fn estimator(r: &Residual, set: Option<&IndexSet>) -> f64 {
    match set {
        None => r.vector.norm(),
        Some(s) => r.vector.project(s).norm(),
    }
}

/// `|||u - v|||` for `H^1`-normalized vectors.
pub fn energy_error(op: &EllipticOperator, u: &SpectralVector, v: &SpectralVector) -> f64 {
    op.energy_norm(&u.sub(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::CoefficientSpectrum;

    fn op1() -> EllipticOperator {
        let nu = CoefficientSpectrum::trig(1, 1.0, &[(1.into(), 0.3)], &[(2.into(), 0.2)]).unwrap();
        let sigma = CoefficientSpectrum::trig(1, 2.0, &[(3.into(), 0.5)], &[]).unwrap();
        EllipticOperator::new(nu, sigma).unwrap()
    }

    #[test]
    fn identity_operator_projects() {
        let op = EllipticOperator::constant(1, 1.0, 1.0).unwrap();
        let f = SpectralVector::from_real_1d(Normalization::HMinus1, &[(0, 1.0), (1, 2.0), (5, 3.0)]);
        let set: IndexSet = [0i64, 1, 2].into_iter().map(MultiIndex::scalar).collect();
        let sol = solve(&op, &f, &set).unwrap();
        let expect = SpectralVector::from_real_1d(Normalization::H1, &[(0, 1.0), (1, 2.0)]);
        assert!(sol.coefficients.sub(&expect).norm() < 1e-14);
        assert!(solve(&op, &f, &IndexSet::new()).is_err());
    }

    #[test]
    fn manufactured_solution_is_recovered() {
        let op = op1();
        let u = SpectralVector::from_real_1d(Normalization::H1, &[(-2, 0.5), (0, 1.0), (3, -0.25)]);
        let f = op.apply(&u);
        let set = IndexSet::ball(1, 6.0);
        let sol = solve(&op, &f, &set).unwrap();
        assert!(sol.coefficients.sub(&u).norm() < 1e-10);
        let r = residual(&op, &f, &sol);
        assert!(r.norm() < 1e-10);
        assert_eq!(estimator(&r, None), r.norm());
    }

    #[test]
    fn cg_matches_direct() {
        let op = op1();
        let f = SpectralVector::from_real_1d(
            Normalization::HMinus1,
            &(-20i64..=20).map(|k| (k, 1.0 / (1.0 + k.abs() as f64))).collect::<Vec<_>>(),
        );
        let set = IndexSet::ball(1, 15.0);
        let direct = solve(&op, &f, &set).unwrap();
        let cfg = SolverConfig { direct_limit: 0, ..Default::default() };
        let cg = solve_with(&op, &f, &set, &cfg).unwrap();
        assert_eq!(cg.work.kind, SolverKind::ConjugateGradient);
        assert!(cg.solver_residual <= 1e-10);
        assert!(cg.coefficients.sub(&direct.coefficients).norm() < 1e-8);
    }

    #[test]
    fn empty_set_residual_is_data() {
        let op = op1();
        let f = SpectralVector::from_real_1d(Normalization::HMinus1, &[(1, 1.0)]);
        let r = residual(&op, &f, &GalerkinSolution::empty(1));
        assert_eq!(r.vector, f);
    }

    #[test]
    fn feasible_residual_on_polynomial_data_is_exact() {
        let op = op1();
        let f = SpectralVector::from_real_1d(Normalization::HMinus1, &[(0, 1.0), (1, 0.5)]);
        let set = IndexSet::ball(1, 2.0);
        let sol = solve(&op, &f, &set).unwrap();
        let exact = residual(&op, &f, &sol);
        match feasible_residual(&op, &f, 0.0, &sol, 0.1).unwrap() {
            FeasibleOutcome::Residual(r) => {
                assert_eq!(r.gamma_bound, 0.0);
                assert!(r.vector.sub(&exact.vector).norm() < 1e-14);
            }
            other => panic!("{other:?}"),
        }
    }
}
