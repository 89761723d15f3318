//! Worst-case search inside the ball: simulated annealing, initial
//! temperature calibration and a brute-force explorer.
//!
//! The chain maximizes `h(θ) = expected loss` over inside-ball states. A
//! proposal `ζ` that leaves the ball or is invalid is dropped without a
//! Metropolis decision; an inside proposal is accepted with probability
//! `min(1, exp(Δh / T))`, `Δh = h(ζ) − h(θ)`, and otherwise the chain keeps
//! `θ`.
//!
//! With a Monte Carlo objective both `h(ζ)` and `h(θ)` are evaluated on the
//! same per-iteration seed, so their difference does not carry independent
//! sampling noise.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{LossEvaluator, Regime};
use crate::neighborhood::{ModelState, MoveKind, MoveMix, Neighborhood, Proposal};
use crate::seed;

/// Temperature schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cooling {
    /// `T_i = T₀ · factor^⌊(i−1)/every⌋`.
    Geometric { factor: f64, every: usize },
    /// `T_i = T₀ / (1 + scale · ln i)`.
    Logarithmic { scale: f64 },
}

impl Default for Cooling {
    fn default() -> Self {
        Cooling::Geometric { factor: 0.95, every: 50 }
    }
}

impl Cooling {
    fn validate(&self) -> Result<()> {
        match *self {
            Cooling::Geometric { factor, every } => {
                if !(factor > 0.0 && factor < 1.0) {
                    return Err(Error::param("cooling.factor", format!("{factor} must lie in (0, 1)")));
                }
                if every == 0 {
                    return Err(Error::param("cooling.every", "must be at least 1"));
                }
            }
            Cooling::Logarithmic { scale } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::param("cooling.scale", format!("{scale} must be positive")));
                }
            }
        }
        Ok(())
    }

    /// Temperature at iteration `iter` (1-based; iteration 0 is the start).
    pub fn temperature(&self, t0: f64, iter: usize) -> f64 {
        if iter <= 1 {
            return t0;
        }
        match *self {
            Cooling::Geometric { factor, every } => t0 * factor.powi(((iter - 1) / every) as i32),
            Cooling::Logarithmic { scale } => t0 / (1.0 + scale * (iter as f64).ln()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialTemperature {
    Fixed { t0: f64 },
    /// Median loss over sampled inside-ball states.
    AutoMedian { n_samples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealingConfig {
    pub n_iters: usize,
    #[serde(default)]
    pub cooling: Cooling,
    pub t0: InitialTemperature,
    pub move_mix: MoveMix,
    pub evaluator: LossEvaluator,
    /// Keep every accepted state in the trace (used for audits).
    #[serde(default)]
    pub record_states: bool,
}

impl AnnealingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iters == 0 {
            return Err(Error::param("n_iters", "must be at least 1"));
        }
        self.cooling.validate()?;
        match self.t0 {
            InitialTemperature::Fixed { t0 } if !(t0 > 0.0 && t0.is_finite()) => {
                return Err(Error::param("t0", format!("{t0} must be positive")))
            }
            InitialTemperature::AutoMedian { n_samples } if n_samples < 3 => {
                return Err(Error::param("t0.n_samples", "need at least 3 calibration samples"))
            }
            _ => {}
        }
        // revalidates probabilities after deserialization
        MoveMix::new(self.move_mix.entries().to_vec())?;
        Ok(())
    }
}

/// `min(1, exp(Δh / T))`.
pub fn acceptance_probability(delta_h: f64, temperature: f64) -> f64 {
    if delta_h >= 0.0 {
        1.0
    } else if temperature <= 0.0 {
        0.0
    } else {
        (delta_h / temperature).exp().min(1.0)
    }
}

/// Metropolis decision for an objective change `delta_h` at `temperature`.
/// Draws a uniform only when the move is downhill.
pub fn metropolis_accept<R: Rng + ?Sized>(delta_h: f64, temperature: f64, rng: &mut R) -> bool {
    let p = acceptance_probability(delta_h, temperature);
    p >= 1.0 || rng.random::<f64>() < p
}

/// Median; the mean of the two middle values for an even count.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

/// One iteration of a chain. Iteration 0 is the starting state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iter: usize,
    /// Objective of the chain state after this iteration.
    pub objective: f64,
    /// Objective of the proposal, when it was inside the ball.
    pub proposal_objective: Option<f64>,
    pub temperature: f64,
    /// Move that produced the proposal; `None` for iteration 0.
    pub kind: Option<&'static str>,
    pub accepted: bool,
    pub inside: bool,
    /// Divergence of the proposal from the center; `None` if it was not
    /// computed (filtered or invalid proposal).
    pub kl: Option<f64>,
    /// Mass of the chain state after this iteration.
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct AnnealingTrace {
    pub records: Vec<TraceRecord>,
    pub best_state: ModelState,
    pub best_objective: f64,
    pub t0: f64,
    /// Accepted states in order, when requested by the config.
    pub accepted_states: Vec<ModelState>,
}

impl AnnealingTrace {
    pub fn acceptance_rate(&self) -> f64 {
        let inside = self.records.iter().skip(1).filter(|r| r.inside).count();
        if inside == 0 {
            return 0.0;
        }
        self.records.iter().skip(1).filter(|r| r.accepted).count() as f64 / inside as f64
    }

    /// Objectives of every inside-ball state the chain evaluated, starting
    /// with the initial state.
    pub fn visited_objectives(&self) -> Vec<f64> {
        let mut out = vec![self.records[0].objective];
        out.extend(self.records.iter().skip(1).filter_map(|r| r.proposal_objective));
        out
    }
}

const CALIBRATION_STREAM: u64 = 1;
const CHAIN_STREAM: u64 = 2;
const EVAL_STREAM: u64 = 3;

pub const CALIBRATION_STALL: usize = 100;

/// Median expected loss over the center and `n_samples − 1` inside-ball
/// states collected by a random walk from the center. Because the walk only
/// moves on inside proposals it drifts toward the boundary, so both the
/// center and near-boundary models enter the sample. A walk stuck for
/// [`CALIBRATION_STALL`] proposals in a row restarts from the center.
pub fn calibrate_t0(
    nbhd: &Neighborhood,
    regime: &Regime,
    evaluator: &LossEvaluator,
    mix: &MoveMix,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if n_samples < 3 {
        return Err(Error::param("n_samples", "need at least 3 calibration samples"));
    }
    let mut rng = seed::rng(seed::derive(seed, 0));
    let mut states = vec![nbhd.center_state()];
    let mut current = nbhd.center_state();
    let cap = 100 * n_samples;
    let mut proposals = 0;
    let mut stalled = 0;
    while states.len() < n_samples {
        if proposals >= cap {
            return Err(Error::CalibrationFailed { found: states.len(), wanted: n_samples, proposals });
        }
        proposals += 1;
        if let Proposal::Inside { state, .. } = nbhd.propose(&current, mix, &mut rng)? {
            states.push(state.clone());
            current = state;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled == CALIBRATION_STALL {
                current = nbhd.center_state();
                stalled = 0;
            }
        }
    }
    let eval_seed = seed::derive(seed, 1);
    let losses = states
        .par_iter()
        .enumerate()
        .map(|(k, s)| evaluator.evaluate(s.graphon(), regime, seed::derive(eval_seed, k as u64)).map(|l| l.expected_loss))
        .collect::<Result<Vec<f64>>>()?;
    let t0 = median(&losses).expect("at least three samples");
    if !(t0 > 0.0) {
        // every sampled model is deterministic; any positive scale will do
        return Ok(f64::MIN_POSITIVE);
    }
    Ok(t0)
}

/// Runs one annealing chain from the center.
pub fn anneal(nbhd: &Neighborhood, regime: &Regime, cfg: &AnnealingConfig, seed: u64) -> Result<AnnealingTrace> {
    cfg.validate()?;
    let t0 = match cfg.t0 {
        InitialTemperature::Fixed { t0 } => t0,
        InitialTemperature::AutoMedian { n_samples } => calibrate_t0(
            nbhd,
            regime,
            &cfg.evaluator,
            &cfg.move_mix,
            n_samples,
            seed::derive(seed, CALIBRATION_STREAM),
        )?,
    };
    let mut rng = seed::rng(seed::derive(seed, CHAIN_STREAM));
    let eval_seed = seed::derive(seed, EVAL_STREAM);
    let eval = |state: &ModelState, iter: usize| {
        cfg.evaluator
            .evaluate(state.graphon(), regime, seed::derive(eval_seed, iter as u64))
            .map(|l| l.expected_loss)
    };

    let mut current = nbhd.center_state();
    let mut current_h = eval(&current, 0)?;
    let mut best_state = current.clone();
    let mut best_objective = current_h;
    let mut records = Vec::with_capacity(cfg.n_iters + 1);
    records.push(TraceRecord {
        iter: 0,
        objective: current_h,
        proposal_objective: None,
        temperature: t0,
        kind: None,
        accepted: true,
        inside: true,
        kl: Some(0.0),
        mass: current.mass(),
    });
    let mut accepted_states = if cfg.record_states { vec![current.clone()] } else { Vec::new() };

    for iter in 1..=cfg.n_iters {
        let temperature = cfg.cooling.temperature(t0, iter);
        let proposal = nbhd.propose(&current, &cfg.move_mix, &mut rng)?;
        let record = match proposal {
            Proposal::Inside { kind, state } => {
                if cfg.evaluator.is_stochastic() {
                    current_h = eval(&current, iter)?;
                }
                let h = eval(&state, iter)?;
                let accepted = metropolis_accept(h - current_h, temperature, &mut rng);
                let kl = state.kl_from_center;
                if accepted {
                    current = state;
                    current_h = h;
                    if h > best_objective {
                        best_objective = h;
                        best_state = current.clone();
                    }
                    if cfg.record_states {
                        accepted_states.push(current.clone());
                    }
                }
                TraceRecord {
                    iter,
                    objective: current_h,
                    proposal_objective: Some(h),
                    temperature,
                    kind: Some(kind.name()),
                    accepted,
                    inside: true,
                    kl,
                    mass: current.mass(),
                }
            }
            Proposal::Outside { kind, kl } => dropped(iter, current_h, temperature, kind, Some(kl), &current),
            Proposal::Invalid { kind, .. } => dropped(iter, current_h, temperature, kind, None, &current),
        };
        records.push(record);
    }

    Ok(AnnealingTrace { records, best_state, best_objective, t0, accepted_states })
}

fn dropped(iter: usize, objective: f64, temperature: f64, kind: MoveKind, kl: Option<f64>, current: &ModelState) -> TraceRecord {
    TraceRecord {
        iter,
        objective,
        proposal_objective: None,
        temperature,
        kind: Some(kind.name()),
        accepted: false,
        inside: false,
        kl,
        mass: current.mass(),
    }
}

/// Independent chains with seeds `derive(seed, r)`, run in parallel.
pub fn anneal_restarts(
    nbhd: &Neighborhood,
    regime: &Regime,
    cfg: &AnnealingConfig,
    n_restarts: usize,
    seed: u64,
) -> Result<Vec<AnnealingTrace>> {
    (0..n_restarts as u64)
        .into_par_iter()
        .map(|r| anneal(nbhd, regime, cfg, seed::derive(seed, r)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceConfig {
    pub n_models: usize,
    pub move_mix: MoveMix,
    pub evaluator: LossEvaluator,
}

#[derive(Debug, Clone)]
pub struct BruteForceResult {
    pub best_state: ModelState,
    pub best_loss: f64,
    /// Models actually evaluated; below the request only if the walk hit
    /// its proposal cap.
    pub n_models: usize,
    pub n_proposals: usize,
}

const BRUTE_FORCE_CHUNK: usize = 4096;

/// Explores the ball with a random walk that moves on every inside proposal
/// and evaluates each visited model. Model 0 is the center. The walk gives up
/// after `100 · n_models` proposals.
pub fn brute_force_max(nbhd: &Neighborhood, regime: &Regime, cfg: &BruteForceConfig, seed: u64) -> Result<BruteForceResult> {
    brute_force_scan(nbhd, regime, cfg, seed, |_, _| {})
}

/// [`brute_force_max`] that also reports every model's loss, in walk order.
pub fn brute_force_scan<F>(
    nbhd: &Neighborhood,
    regime: &Regime,
    cfg: &BruteForceConfig,
    seed: u64,
    mut on_loss: F,
) -> Result<BruteForceResult>
where
    F: FnMut(usize, f64),
{
    if cfg.n_models == 0 {
        return Err(Error::param("n_models", "must be at least 1"));
    }
    let mut rng = seed::rng(seed::derive(seed, CHAIN_STREAM));
    let eval_seed = seed::derive(seed, EVAL_STREAM);
    let cap = cfg.n_models.saturating_mul(100);

    let mut current = nbhd.center_state();
    let mut best: Option<(ModelState, f64)> = None;
    let mut evaluated = 0;
    let mut proposals = 0;
    let mut chunk = vec![current.clone()];
    loop {
        let walk_done = evaluated + chunk.len() >= cfg.n_models || proposals >= cap;
        if chunk.len() >= BRUTE_FORCE_CHUNK || (walk_done && !chunk.is_empty()) {
            let losses = chunk
                .par_iter()
                .enumerate()
                .map(|(k, s)| {
                    let idx = (evaluated + k) as u64;
                    cfg.evaluator
                        .evaluate(s.graphon(), regime, seed::derive(eval_seed, idx))
                        .map(|l| l.expected_loss)
                })
                .collect::<Result<Vec<f64>>>()?;
            for (state, loss) in chunk.drain(..).zip(losses) {
                on_loss(evaluated, loss);
                evaluated += 1;
                if best.as_ref().is_none_or(|(_, b)| loss > *b) {
                    best = Some((state, loss));
                }
            }
        }
        if walk_done {
            break;
        }
        proposals += 1;
        if let Proposal::Inside { state, .. } = nbhd.propose(&current, &cfg.move_mix, &mut rng)? {
            chunk.push(state.clone());
            current = state;
        }
    }
    let (best_state, best_loss) = best.expect("the center is always evaluated");
    Ok(BruteForceResult { best_state, best_loss, n_models: evaluated, n_proposals: proposals })
}
