//! Ordering shortcut that skips the divergence computation for proposals
//! that provably stay inside the ball.
//!
//! A rescale by `ρ ≤ 1` shrinks every height, so the sorted heights of the
//! previous state dominate those of the proposal. Dominance alone does not
//! bound the divergence from the center (shrinking a cell that already sits
//! below the center moves it further away), so a skip additionally requires
//! every proposal cell to lie between the center and the previous state.
//! Bernoulli KL is monotone in `q` on each side of `p`, hence each cell's
//! contribution cannot grow and the proposal is no further out than the
//! previously accepted state.

use crate::graphon::StepGraphon;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterDecision {
    SkipKlInside,
    MustComputeKl,
}

/// `rescale_rho` is `Some(ρ)` when `proposal` came from rescaling
/// `prev_accepted` by `ρ`, `None` for any other move.
pub fn majorization_filter(
    center: &StepGraphon,
    prev_accepted: &StepGraphon,
    proposal: &StepGraphon,
    rescale_rho: Option<f64>,
) -> FilterDecision {
    if center.resolution() != proposal.resolution() || prev_accepted.resolution() != proposal.resolution() {
        return FilterDecision::MustComputeKl;
    }
    if prev_accepted == proposal {
        return FilterDecision::SkipKlInside;
    }
    match rescale_rho {
        Some(rho) if rho <= 1.0 => {}
        _ => return FilterDecision::MustComputeKl,
    }

    let mut x = prev_accepted.free_cells();
    let mut y = proposal.free_cells();
    x.sort_unstable_by(|a, b| b.total_cmp(a));
    y.sort_unstable_by(|a, b| b.total_cmp(a));
    let dominated = x.iter().zip(&y).all(|(xk, yk)| xk >= yk);

    let between = center
        .heights()
        .iter()
        .zip(prev_accepted.heights().iter().zip(proposal.heights()))
        .all(|(&p, (&xp, &yp))| (yp - p) * (xp - p) >= 0.0 && (yp - p).abs() <= (xp - p).abs());

    if dominated && between {
        FilterDecision::SkipKlInside
    } else {
        FilterDecision::MustComputeKl
    }
}
