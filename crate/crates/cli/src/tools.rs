//! One-shot utilities behind `make-eg1`, `kl` and `sample`.

use netrobust_core::{kl_exact, kl_monte_carlo, seed, AdjacencyMatrix, Error, KlEstimate, ModelState, MoveMix, StepGraphon};

/// Walks `moves` perturb/rescale steps from the flat graphon at `p`. Invalid
/// proposals are redrawn and do not count as moves.
pub fn eg1_state(n: usize, p: f64, moves: usize, kappa: f64, delta: f64, seed: u64) -> netrobust_core::Result<StepGraphon> {
    let mix = MoveMix::method_one(kappa, delta)?;
    let mut rng = seed::rng(seed);
    let mut state = ModelState::at_center(&StepGraphon::flat(n, p)?);
    let mut done = 0;
    // a walk that cannot move at all would otherwise spin forever
    let cap = 1000 * moves.max(1);
    for _ in 0..cap {
        if done == moves {
            break;
        }
        match mix.choose(&mut rng).apply(&state, &mut rng) {
            Ok(next) => {
                state = next;
                done += 1;
            }
            Err(Error::InvalidProposal(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if done < moves {
        return Err(Error::InvalidParameter { name: "moves", reason: format!("only {done} of {moves} valid moves in {cap} proposals") });
    }
    Ok(state.into_graphon())
}

/// Exact divergence, or the point-pattern estimate when `mc` is given as
/// `(n_points, n_reps)`.
pub fn kl_between(center: &StepGraphon, model: &StepGraphon, mc: Option<(usize, usize)>, seed: u64) -> netrobust_core::Result<KlEstimate> {
    match mc {
        None => kl_exact(center, model),
        Some((points, reps)) => kl_monte_carlo(center, model, points, reps, seed),
    }
}

/// `count` independent graphs; graph `k` uses seed `derive(seed, k)`.
pub fn sample_graphs(model: &StepGraphon, n_nodes: usize, count: usize, seed: u64) -> netrobust_core::Result<Vec<AdjacencyMatrix>> {
    (0..count as u64).map(|k| model.sample_graph(n_nodes, seed::derive(seed, k)).map(|(g, _)| g)).collect()
}
