//! Marking, enrichment and coarsening of active sets.

use crate::error::{Error, Result};
use crate::operator::TruncationModel;
use crate::spectral_core::{IndexSet, MultiIndex, SpectralVector};
use crate::sparsity::tail_errors_of;

/// Relative slack in the bulk test, so that plateau counts are not shifted
/// by rounding in `θ^2`.
pub const BULK_REL_TOL: f64 = 1e-12;

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("θ must lie in (0, 1), got {theta}")))
    }
}

/// `captured >= θ^2 total`, up to [`BULK_REL_TOL`].
pub fn bulk_satisfied(captured_sq: f64, total_sq: f64, theta: f64) -> bool {
    captured_sq >= theta * theta * total_sq * (1.0 - BULK_REL_TOL)
}

/// Smallest set outside `exclude` carrying a `θ`-fraction of the residual.
///
/// The residual is first restricted to the complement of `exclude`; the
/// selection is the shortest prefix of its decreasing rearrangement with
/// `Σ |R_k|^2 >= θ^2 ‖r‖^2`.
pub fn dorfler(r: &SpectralVector, theta: f64, exclude: &IndexSet) -> Result<IndexSet> {
    check_theta(theta)?;
    let restricted = r.project_complement(exclude);
    let sorted = restricted.rearrange();
    let total = restricted.norm_sq();
    let mut out = IndexSet::new();
    if total == 0.0 {
        return Ok(out);
    }
    let mut captured = 0.0;
    for (k, m) in sorted {
        out.insert(k);
        captured += m * m;
        if bulk_satisfied(captured, total, theta) {
            break;
        }
    }
    Ok(out)
}

/// `{k : |k - ℓ| <= J for some ℓ ∈ set}`.
pub fn enrich(set: &IndexSet, j: usize) -> IndexSet {
    let Some(first) = set.iter().next() else {
        return IndexSet::new();
    };
    if j == 0 {
        return set.clone();
    }
    let ball = MultiIndex::ball(first.dim(), j as f64);
    let mut out = IndexSet::new();
    for l in set {
        for h in &ball {
            out.insert(l.add(h));
        }
    }
    out
}

/// Dörfler marking followed by enrichment with radius `J`.
pub fn e_dorfler(r: &SpectralVector, theta: f64, j: usize, exclude: &IndexSet) -> Result<IndexSet> {
    Ok(enrich(&dorfler(r, theta, exclude)?, j))
}

/// Shortest prefix `Λ` of the rearrangement of `w` with `‖w - P_Λ w‖ <= 2ε`.
pub fn coarse(w: &SpectralVector, eps: f64) -> Result<IndexSet> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("coarsening threshold must be positive, got {eps}")));
    }
    let sorted = w.rearrange();
    let moduli: Vec<f64> = sorted.iter().map(|p| p.1).collect();
    let tails = tail_errors_of(&moduli);
    let n = tails.iter().position(|&e| e <= 2.0 * eps).unwrap_or(moduli.len());
    Ok(sorted.into_iter().take(n).map(|p| p.0).collect())
}

/// Smallest `J` with `ψ_{A^{-1}}(J) <= sqrt((1 - θ^2) / (α_* α^*))`.
pub fn select_enrichment_radius(
    theta: f64,
    inverse: &TruncationModel,
    alpha_star: f64,
    alpha_upper: f64,
) -> Result<usize> {
    check_theta(theta)?;
    if !(alpha_star > 0.0 && alpha_upper >= alpha_star) {
        return Err(Error::Domain("need 0 < α_* <= α^*".into()));
    }
    let target = ((1.0 - theta * theta) / (alpha_star * alpha_upper)).sqrt();
    (0..=1_000_000usize)
        .find(|&j| inverse.psi(j) <= target)
        .ok_or_else(|| Error::NoValidRadius(format!("ψ(J) stays above {target:.3e} for J <= 10^6")))
}
