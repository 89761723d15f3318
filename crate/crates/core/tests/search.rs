use netrobust_core::annealing::{anneal_restarts, metropolis_accept, AnnealingConfig, Cooling, InitialTemperature};
use netrobust_core::radius::{diagnose, AnnealingDiagnostic};
use netrobust_core::seed;
use netrobust_core::*;

fn exact_config(n_iters: usize, kappa: f64) -> AnnealingConfig {
    AnnealingConfig {
        n_iters,
        cooling: Cooling::Geometric { factor: 0.95, every: n_iters / 100 },
        t0: InitialTemperature::AutoMedian { n_samples: 21 },
        move_mix: MoveMix::method_one(kappa, 0.02).unwrap(),
        evaluator: LossEvaluator::Exact,
        record_states: false,
    }
}

#[test]
fn doubling_graphs_halves_the_spread_of_the_variance_term() {
    // flat model: latent positions are irrelevant, so doubling the graphs
    // per draw doubles the number of independent networks
    let w = StepGraphon::flat(2, 0.3).unwrap();
    let spread = |g: usize| {
        let regime = Regime::new(GraphFeature::Density, 20, SampleBudget { n_param_samples: 10, n_graphs_per_param: g }).unwrap();
        let v: Vec<f64> = (0..400)
            .map(|r| expected_loss(&w, &regime, seed::derive(g as u64, r)).unwrap().variance_term)
            .collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let ratio = spread(10) / spread(20);
    // log-ratio has standard deviation ≈ sqrt(4/399) ≈ 0.1 around ln 2
    assert!((ratio / 2.0).ln().abs() < 0.3, "ratio {ratio}");
}

#[test]
fn metropolis_frequency_matches_exponential() {
    let mut rng = seed::rng(12);
    for (dh, t) in [(-1.0, 1.0), (-2e-5, 5e-5), (-0.1, 1.0)] {
        let trials = 10_000;
        let hits = (0..trials).filter(|_| metropolis_accept(dh, t, &mut rng)).count();
        let p = (dh / t).exp();
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((hits as f64 / trials as f64 - p).abs() < 3.0 * se, "{dh}/{t}: {hits}");
    }
    assert!(metropolis_accept(0.0, 1e-12, &mut rng));
}

#[test]
fn two_cell_grid_annealing_agrees_with_brute_force() {
    let center = StepGraphon::flat(2, 0.5).unwrap();
    let nb = Neighborhood::new(center, 0.05, KlPolicy::ExactOnly).unwrap();
    let regime = Regime::new(GraphFeature::Density, 100, SampleBudget::SEARCH).unwrap();
    let mix = MoveMix::method_one(256.0, 0.02).unwrap();
    let bf = brute_force_max(
        &nb,
        &regime,
        &BruteForceConfig { n_models: 100_000, move_mix: mix, evaluator: LossEvaluator::Exact },
        1,
    )
    .unwrap();
    let traces = anneal_restarts(&nb, &regime, &exact_config(5000, 256.0), 20, 2).unwrap();
    let best = traces.iter().map(|t| t.best_objective).fold(f64::MIN, f64::max);
    assert!((best / bf.best_loss - 1.0).abs() < 0.02, "{best} vs {}", bf.best_loss);
}

#[test]
fn erdos_renyi_score_grows_with_radius() {
    let center = StepGraphon::flat(4, 0.5).unwrap();
    let regime = Regime::new(GraphFeature::Density, 100, SampleBudget::SEARCH).unwrap();
    let cfg = exact_config(4000, 1024.0);
    let scores: Vec<f64> = [0.1, 0.5, 0.921]
        .iter()
        .map(|&c| {
            let nb = Neighborhood::new(center.clone(), c, KlPolicy::ExactOnly).unwrap();
            diagnose(&nb, &regime, &cfg, 1.0, 5).unwrap().score()
        })
        .collect();
    assert!(scores.windows(2).all(|w| w[1] > w[0]), "{scores:?}");
    assert!(scores[0] > 1.0);

    // a vanishing ball leaves only the center
    let tiny = Neighborhood::new(center, 1e-12, KlPolicy::ExactOnly).unwrap();
    // nothing but the center fits, so the temperature cannot be calibrated
    let mut cfg = exact_config(200, 1024.0);
    assert!(matches!(diagnose(&tiny, &regime, &cfg, 1.0, 5), Err(Error::CalibrationFailed { .. })));
    cfg.t0 = InitialTemperature::Fixed { t0: 1e-4 };
    let d = diagnose(&tiny, &regime, &cfg, 1.0, 5).unwrap();
    assert!(d.is_robust());
    assert!(d.score().abs() < 1e-9);
}

#[test]
fn annealing_radius_search_is_deterministic() {
    let diag = AnnealingDiagnostic {
        center: StepGraphon::flat(2, 0.5).unwrap(),
        policy: KlPolicy::ExactOnly,
        regime: Regime::new(GraphFeature::AverageDegree, 50, SampleBudget::SEARCH).unwrap(),
        annealing: exact_config(400, 64.0),
        theta_score: 1.0,
    };
    let cfg = RadiusSearchConfig { c_init: 0.1, k_iters: 30 };
    let a = min_nonrobust_radius(&diag, &cfg, 8).unwrap();
    let b = min_nonrobust_radius(&diag, &cfg, 8).unwrap();
    assert_eq!(a, b);
    assert!(a.radius > 0.0 && a.radius.is_finite());
}
