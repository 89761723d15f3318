//! The Kullback–Leibler ball around a center graphon and the moves that
//! explore it.
//!
//! A [`ModelState`] tracks its free cells (upper triangle plus diagonal) as
//! simplex weights `K = heights / base_total`, where `base_total` is the
//! free-cell height sum of the center. The weights sum to the state's mass
//! `α`, which starts at 1 and only changes under the rescale move.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::divergence::{self, normalized_gammas, majorization_filter, DirichletSpec, FilterDecision};
use crate::error::{Error, InvalidReason, Result};
use crate::graphon::{check_same_resolution, StepGraphon};

/// Added to every Gamma shape in the perturb move so that empty cells can
/// become occupied.
pub const GAMMA_SHAPE_FLOOR: f64 = 1e-6;

/// Default rescale half-width.
pub const DEFAULT_DELTA: f64 = 0.05;

const MASS_TOL: f64 = 1e-12;

/// How membership in the ball is decided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KlPolicy {
    ExactOnly,
    FilterThenExact,
    MonteCarlo { n_points: usize, n_reps: usize, seed: u64 },
}

/// Closed KL ball `{W : KL(center, W) ≤ radius}`.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    center: StepGraphon,
    radius: f64,
    policy: KlPolicy,
}

impl Neighborhood {
    pub fn new(center: StepGraphon, radius: f64, policy: KlPolicy) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param("radius", format!("{radius} must be positive and finite")));
        }
        if let KlPolicy::MonteCarlo { n_points, n_reps, .. } = policy {
            if n_points < 2 || n_reps == 0 {
                return Err(Error::param("policy", "Monte Carlo policy needs n_points ≥ 2 and n_reps ≥ 1"));
            }
        }
        Ok(Neighborhood { center, radius, policy })
    }

    pub fn center(&self) -> &StepGraphon {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn policy(&self) -> KlPolicy {
        self.policy
    }

    /// Same center and policy, different radius.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Self::new(self.center.clone(), radius, self.policy)
    }

    pub fn center_state(&self) -> ModelState {
        ModelState::at_center(&self.center)
    }

    /// Divergence of `model` from the center under the configured policy.
    pub fn divergence(&self, model: &StepGraphon) -> Result<f64> {
        match self.policy {
            KlPolicy::ExactOnly | KlPolicy::FilterThenExact => {
                divergence::kl_exact(&self.center, model).map(|k| k.value)
            }
            KlPolicy::MonteCarlo { n_points, n_reps, seed } => {
                divergence::kl_monte_carlo(&self.center, model, n_points, n_reps, seed).map(|k| k.value)
            }
        }
    }

    /// Decides whether `state` lies in the ball. Under
    /// [`KlPolicy::FilterThenExact`] the ordering filter is consulted first
    /// against `prev_accepted`.
    pub fn contains(&self, state: &ModelState, prev_accepted: Option<&ModelState>) -> Result<Membership> {
        check_same_resolution(&self.center, state.graphon())?;
        if let (KlPolicy::FilterThenExact, Some(prev)) = (self.policy, prev_accepted) {
            let rho = match state.origin {
                Origin::Rescale { rho } => Some(rho),
                _ => None,
            };
            if majorization_filter(&self.center, prev.graphon(), state.graphon(), rho) == FilterDecision::SkipKlInside {
                debug_assert!(
                    divergence::kl_exact(&self.center, state.graphon())
                        .map(|k| k.value <= self.radius.max(prev.kl_from_center.unwrap_or(0.0)))
                        .unwrap_or(false),
                    "ordering filter skipped a state outside the ball"
                );
                return Ok(Membership::SkippedInside);
            }
        }
        match self.divergence(state.graphon()) {
            Ok(kl) if kl <= self.radius => Ok(Membership::Inside(kl)),
            Ok(kl) => Ok(Membership::Outside(kl)),
            Err(Error::AbsoluteContinuityViolation { .. }) => Ok(Membership::Outside(f64::INFINITY)),
            Err(e) => Err(e),
        }
    }

    /// Draws one move from `mix`, applies it and checks membership.
    pub fn propose<R: Rng + ?Sized>(&self, state: &ModelState, mix: &MoveMix, rng: &mut R) -> Result<Proposal> {
        let kind = mix.choose(rng);
        let candidate = match kind.apply(state, rng) {
            Ok(s) => s,
            Err(Error::InvalidProposal(reason)) => return Ok(Proposal::Invalid { kind, reason }),
            Err(Error::DegenerateState) => {
                return Ok(Proposal::Invalid { kind, reason: InvalidReason::HeightExceedsOne })
            }
            Err(e) => return Err(e),
        };
        Ok(match self.contains(&candidate, Some(state))? {
            Membership::Inside(kl) => Proposal::Inside { kind, state: candidate.with_kl(Some(kl)) },
            Membership::SkippedInside => Proposal::Inside { kind, state: candidate.with_kl(None) },
            Membership::Outside(kl) => Proposal::Outside { kind, kl },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Membership {
    Inside(f64),
    Outside(f64),
    SkippedInside,
}

impl Membership {
    pub fn is_inside(&self) -> bool {
        !matches!(self, Membership::Outside(_))
    }
}

/// Outcome of [`Neighborhood::propose`].
#[derive(Debug, Clone)]
pub enum Proposal {
    Inside { kind: MoveKind, state: ModelState },
    Outside { kind: MoveKind, kl: f64 },
    Invalid { kind: MoveKind, reason: InvalidReason },
}

/// Which move produced a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Origin {
    Center,
    Perturb,
    Rescale { rho: f64 },
    Bootstrap,
}

/// A point of the search: graphon plus simplex bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    graphon: StepGraphon,
    mass: f64,
    base_total: f64,
    /// Divergence from the center when it was computed; `None` when the
    /// ordering filter skipped it.
    pub kl_from_center: Option<f64>,
    pub origin: Origin,
}

impl ModelState {
    /// The center itself: mass 1, divergence 0.
    pub fn at_center(center: &StepGraphon) -> Self {
        ModelState {
            base_total: center.free_cells().iter().sum(),
            graphon: center.clone(),
            mass: 1.0,
            kl_from_center: Some(0.0),
            origin: Origin::Center,
        }
    }

    /// A state at an arbitrary graphon, with mass measured against `center`.
    pub fn relative_to(center: &StepGraphon, graphon: StepGraphon) -> Result<Self> {
        check_same_resolution(center, &graphon)?;
        let base_total: f64 = center.free_cells().iter().sum();
        if !(base_total > 0.0) {
            return Err(Error::DegenerateState);
        }
        let mass = graphon.free_cells().iter().sum::<f64>() / base_total;
        Ok(ModelState {
            graphon,
            mass,
            base_total,
            kl_from_center: None,
            origin: Origin::Center,
        })
    }

    pub fn graphon(&self) -> &StepGraphon {
        &self.graphon
    }

    pub fn into_graphon(self) -> StepGraphon {
        self.graphon
    }

    /// Current simplex mass `α`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Free-cell height sum of the center this state descends from.
    pub fn base_total(&self) -> f64 {
        self.base_total
    }

    /// Simplex weights `K`; they sum to [`ModelState::mass`].
    pub fn weights(&self) -> Vec<f64> {
        self.graphon.free_cells().iter().map(|h| h / self.base_total).collect()
    }

    /// Free-cell weights scaled to sum to one.
    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        let free = self.graphon.free_cells();
        let total: f64 = free.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateState);
        }
        Ok(free.iter().map(|h| h / total).collect())
    }

    fn with_kl(mut self, kl: Option<f64>) -> Self {
        self.kl_from_center = kl;
        self
    }

    /// Rebuilds the graphon from simplex weights at the current mass.
    fn with_simplex(&self, draw: &[f64], origin: Origin) -> Result<Self> {
        let n = self.graphon.resolution();
        let scale = self.mass * self.base_total;
        let free: Vec<f64> = draw.iter().map(|d| d * scale).collect();
        if free.iter().any(|&h| h > 1.0) {
            return Err(Error::InvalidProposal(InvalidReason::HeightExceedsOne));
        }
        Ok(ModelState {
            graphon: StepGraphon::from_free_cells(n, &free)?,
            mass: self.mass,
            base_total: self.base_total,
            kl_from_center: None,
            origin,
        })
    }
}

/// Perturb move: redraws the free-cell weights from
/// `Dirichlet(κ·w + GAMMA_SHAPE_FLOOR)` around the current normalized
/// weights `w`, keeping the mass.
pub fn perturb<R: Rng + ?Sized>(state: &ModelState, kappa: f64, rng: &mut R) -> Result<ModelState> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::param("kappa", format!("{kappa} must be positive")));
    }
    if !(state.mass * state.base_total > 0.0) {
        return Err(Error::DegenerateState);
    }
    let w = state.normalized_weights()?;
    let shapes: Vec<f64> = w.iter().map(|wk| kappa * wk + GAMMA_SHAPE_FLOOR).collect();
    let draw = normalized_gammas(&shapes, rng)?;
    state.with_simplex(&draw, Origin::Perturb)
}

/// Rescale move: multiplies every height and the mass by `ρ`, drawn from
/// `{1 − δ, 1 + δ}` with equal probability.
pub fn rescale<R: Rng + ?Sized>(state: &ModelState, delta: f64, rng: &mut R) -> Result<ModelState> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("{delta} must lie in (0, 1)")));
    }
    let rho = if rng.random::<bool>() { 1.0 + delta } else { 1.0 - delta };
    rescale_by(state, rho)
}

/// Rescale by a fixed factor.
pub fn rescale_by(state: &ModelState, rho: f64) -> Result<ModelState> {
    let heights: Vec<f64> = state.graphon.heights().iter().map(|h| h * rho).collect();
    if heights.iter().any(|&h| h > 1.0) {
        return Err(Error::InvalidProposal(InvalidReason::HeightExceedsOne));
    }
    let mass = state.mass * rho;
    if rho > 1.0 && mass > 1.0 + MASS_TOL {
        return Err(Error::InvalidProposal(InvalidReason::MassExceedsOne));
    }
    Ok(ModelState {
        graphon: StepGraphon::new(state.graphon.resolution(), heights)?,
        mass,
        base_total: state.base_total,
        kl_from_center: None,
        origin: Origin::Rescale { rho },
    })
}

/// Generalized Bayesian bootstrap: reweighs the free cells with
/// `w ~ Dirichlet(α_n·p)`, where `p` must be the state's normalized weights.
pub fn bootstrap_reweigh<R: Rng + ?Sized>(state: &ModelState, spec: &DirichletSpec, rng: &mut R) -> Result<ModelState> {
    let current = state.normalized_weights()?;
    if current.len() != spec.p().len()
        || current.iter().zip(spec.p()).any(|(a, b)| (a - b).abs() > 1e-9)
    {
        return Err(Error::param("spec", "base weights do not match the state's normalized weights"));
    }
    let draw = spec.sample(rng)?;
    state.with_simplex(&draw, Origin::Bootstrap)
}

/// Move kernels with their parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MoveKind {
    Perturb { kappa: f64 },
    Rescale { delta: f64 },
    /// Reweighs around the current state with concentration `alpha_n`.
    Bootstrap { alpha_n: f64 },
}

impl MoveKind {
    pub fn name(&self) -> &'static str {
        match self {
            MoveKind::Perturb { .. } => "perturb",
            MoveKind::Rescale { .. } => "rescale",
            MoveKind::Bootstrap { .. } => "bootstrap",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MoveKind::Perturb { kappa } if !(kappa > 0.0 && kappa.is_finite()) => {
                Err(Error::param("kappa", format!("{kappa} must be positive")))
            }
            MoveKind::Rescale { delta } if !(delta > 0.0 && delta < 1.0) => {
                Err(Error::param("delta", format!("{delta} must lie in (0, 1)")))
            }
            MoveKind::Bootstrap { alpha_n } if !(alpha_n > 0.0 && alpha_n.is_finite()) => {
                Err(Error::param("alpha_n", format!("{alpha_n} must be positive")))
            }
            _ => Ok(()),
        }
    }

    pub fn apply<R: Rng + ?Sized>(&self, state: &ModelState, rng: &mut R) -> Result<ModelState> {
        match *self {
            MoveKind::Perturb { kappa } => perturb(state, kappa, rng),
            MoveKind::Rescale { delta } => rescale(state, delta, rng),
            MoveKind::Bootstrap { alpha_n } => {
                let spec = match DirichletSpec::new(alpha_n, state.normalized_weights()?) {
                    Ok(s) => s,
                    // a zero-weight cell has no Dirichlet around it
                    Err(Error::InvalidParameter { name: "p", .. }) => return Err(Error::DegenerateState),
                    Err(e) => return Err(e),
                };
                bootstrap_reweigh(state, &spec, rng)
            }
        }
    }
}

/// Mixture over move kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveMix(Vec<(MoveKind, f64)>);

impl MoveMix {
    pub fn new(entries: Vec<(MoveKind, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::param("move_mix", "no moves"));
        }
        for (kind, p) in &entries {
            kind.validate()?;
            if !(*p >= 0.0) {
                return Err(Error::param("move_mix", format!("probability {p} is negative")));
            }
        }
        let total: f64 = entries.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param("move_mix", format!("probabilities sum to {total}, not 1")));
        }
        Ok(MoveMix(entries))
    }

    /// Perturb 0.8 / rescale 0.2.
    pub fn method_one(kappa: f64, delta: f64) -> Result<Self> {
        Self::new(vec![(MoveKind::Perturb { kappa }, 0.8), (MoveKind::Rescale { delta }, 0.2)])
    }

    /// Bootstrap only.
    pub fn method_two(alpha_n: f64) -> Result<Self> {
        Self::new(vec![(MoveKind::Bootstrap { alpha_n }, 1.0)])
    }

    pub fn entries(&self) -> &[(MoveKind, f64)] {
        &self.0
    }

    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> MoveKind {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(kind, p) in &self.0 {
            acc += p;
            if u < acc {
                return kind;
            }
        }
        self.0.iter().rev().find(|(_, p)| *p > 0.0).map(|(k, _)| *k).unwrap_or(self.0[0].0)
    }
}
