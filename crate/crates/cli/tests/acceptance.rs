//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use netrobust_driver::config::ExperimentConfig;
use netrobust_driver::{eg1_state, run_experiment};
use netrobust_core::annealing::{metropolis_accept, AnnealingConfig, Cooling, InitialTemperature};
use netrobust_core::divergence::{bootstrap_kl_mean, bootstrap_kl_variance, categorical_kl};
use netrobust_core::graphon::free_cell_count;
use netrobust_core::radius::threshold_stub;
use netrobust_core::*;
use rand::Rng;
use sha2::{Digest, Sha256};

struct Outcome {
    passed: bool,
    detail: String,
}

fn random_graphon<R: Rng>(n: usize, lo: f64, hi: f64, rng: &mut R) -> StepGraphon {
    let free: Vec<f64> = (0..free_cell_count(n)).map(|_| rng.random_range(lo..hi)).collect();
    StepGraphon::from_free_cells(n, &free).unwrap()
}

fn kl_oracle() -> Outcome {
    let mut rng = seed::rng(101);
    let mut detail = Vec::new();
    let mut passed = true;
    for n in [2, 3, 5] {
        let agree = (0..50u64)
            .filter(|&k| {
                let a = random_graphon(n, 0.01, 0.99, &mut rng);
                let b = random_graphon(n, 0.01, 0.99, &mut rng);
                let exact = kl_exact(&a, &b).unwrap();
                let mc = kl_monte_carlo(&a, &b, 50, 1000, seed::derive(n as u64, k)).unwrap();
                let se = (mc.std_error.powi(2) + exact.std_error.powi(2)).sqrt();
                (mc.value - exact.value).abs() <= 4.0 * se
            })
            .count();
        passed &= agree >= 48;
        detail.push(format!("n={n}: {agree}/50"));
    }
    Outcome { passed, detail: detail.join(", ") }
}

fn bootstrap_moments() -> Outcome {
    const DRAWS: usize = 1_000_000;
    let mut rng = seed::rng(202);
    let mut worst: f64 = 0.0;
    let mut passed = true;
    for m in [2usize, 3, 4, 9] {
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
        for alpha in [m as f64, 10.0 * m as f64, 100.0 * m as f64] {
            let spec = DirichletSpec::new(alpha, p.clone()).unwrap();
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            let mut sum4 = 0.0;
            let draws: Vec<f64> = (0..DRAWS).map(|_| categorical_kl(&spec.sample(&mut rng).unwrap(), &p)).collect();
            for &d in &draws {
                sum += d;
            }
            let mean = sum / DRAWS as f64;
            for &d in &draws {
                let c = d - mean;
                sum2 += c * c;
                sum4 += c.powi(4);
            }
            let var = sum2 / (DRAWS - 1) as f64;
            let mu4 = sum4 / DRAWS as f64;
            let se_mean = (var / DRAWS as f64).sqrt();
            let se_var = ((mu4 - var * var) / DRAWS as f64).sqrt();
            let z_mean = (bootstrap_kl_mean(&spec) - mean).abs() / se_mean;
            let z_var = (bootstrap_kl_variance(&spec) - var).abs() / se_var;
            worst = worst.max(z_mean).max(z_var);
            passed &= z_mean <= 3.0 && z_var <= 3.0;
        }
    }
    Outcome { passed, detail: format!("12 (m, alpha) cells, largest deviation {worst:.2} SE") }
}

fn analytic_loss() -> Outcome {
    let mut detail = Vec::new();
    let mut passed = true;
    for (i, p) in [0.1, 0.5, 0.9].into_iter().enumerate() {
        let w = StepGraphon::flat(3, p).unwrap();
        let regime = Regime::new(GraphFeature::Density, 100, SampleBudget::FULL).unwrap();
        let est = expected_loss(&w, &regime, 300 + i as u64).unwrap();
        let target = p * (1.0 - p) / 4950.0;
        let z = (est.expected_loss - target).abs() / est.std_error;
        passed &= z <= 3.0;
        detail.push(format!("p={p}: {:.5e} vs {target:.5e} ({z:.2} SE)", est.expected_loss));
    }
    Outcome { passed, detail: detail.join(", ") }
}

fn annealing_config(mix: MoveMix) -> AnnealingConfig {
    AnnealingConfig {
        n_iters: 20_000,
        cooling: Cooling::Geometric { factor: 0.95, every: 200 },
        t0: InitialTemperature::AutoMedian { n_samples: 21 },
        move_mix: mix,
        evaluator: LossEvaluator::Exact,
        record_states: false,
    }
}

/// First walk seed whose end state keeps every height in [0.05, 0.95]. A walk
/// that pins a cell at 0 or near 1 leaves reweighing moves almost no room.
fn interior_eg1(kappa: f64, delta: f64) -> StepGraphon {
    (0..)
        .map(|s| eg1_state(4, 0.5, 100, kappa, delta, s).unwrap())
        .find(|g| g.heights().iter().all(|h| (0.05..=0.95).contains(h)))
        .unwrap()
}

fn annealing_vs_brute_force() -> Outcome {
    const KAPPA: f64 = 1024.0;
    const DELTA: f64 = 0.02;
    let regimes = [
        ("flat", StepGraphon::flat(4, 0.5).unwrap()),
        ("sbm", StepGraphon::sbm(&[vec![0.7, 0.2], vec![0.2, 0.5]], 4).unwrap()),
        ("eg1", interior_eg1(KAPPA, DELTA)),
    ];
    let regime = Regime::new(GraphFeature::Density, 100, SampleBudget::SEARCH).unwrap();
    let mut passed = true;
    let mut detail = Vec::new();
    for (ri, (name, center)) in regimes.into_iter().enumerate() {
        let nb = Neighborhood::new(center, 0.2, KlPolicy::ExactOnly).unwrap();
        let bf_cfg = |n_models| BruteForceConfig {
            n_models,
            move_mix: MoveMix::method_one(16.0, netrobust_core::neighborhood::DEFAULT_DELTA).unwrap(),
            evaluator: LossEvaluator::Exact,
        };
        let bf = brute_force_max(&nb, &regime, &bf_cfg(100_000), 40 + ri as u64).unwrap();
        let bf_big = brute_force_max(&nb, &regime, &bf_cfg(1_000_000), 50 + ri as u64).unwrap();
        for (method, mix) in [(1, MoveMix::method_one(KAPPA, DELTA).unwrap()), (2, MoveMix::method_two(KAPPA).unwrap())] {
            let traces = anneal_restarts(&nb, &regime, &annealing_config(mix), 100, 60 + 10 * ri as u64 + method).unwrap();
            let bests: Vec<f64> = traces.iter().map(|t| t.best_objective).collect();
            let mean = bests.iter().sum::<f64>() / bests.len() as f64;
            let var = bests.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (bests.len() - 1) as f64;
            let ratio = mean / bf.best_loss;
            passed &= (ratio - 1.0).abs() <= 0.02;
            detail.push(format!(
                "\n      {name} method {method}: SA mean {mean:.6e} var {var:.3e}, brute force {:.6e} ({} models), SA/BF {ratio:.4}; brute force at 1e6 models {:.6e}",
                bf.best_loss, bf.n_models, bf_big.best_loss
            ));
        }
    }
    Outcome { passed, detail: detail.concat() }
}

fn bisection() -> Outcome {
    let r = min_nonrobust_radius(&threshold_stub(1.5), &RadiusSearchConfig::default(), 5).unwrap();
    let rel = (r.radius / 1.5 - 1.0).abs();
    Outcome { passed: rel <= 1e-3, detail: format!("radius {} after {} probes, relative error {rel:.2e}", r.radius, r.probes.len()) }
}

fn linf(a: &StepGraphon, b: &StepGraphon) -> f64 {
    a.max_abs_diff(b).unwrap()
}

/// Random inside-ball state with mass at most one, by rejection.
fn inside_state<R: Rng>(nb: &Neighborhood, rng: &mut R) -> ModelState {
    loop {
        let g = random_graphon(2, 0.01, 0.99, rng);
        let s = ModelState::relative_to(nb.center(), g).unwrap();
        if s.mass() <= 1.0 && nb.contains(&s, None).unwrap().is_inside() {
            return s;
        }
    }
}

fn reachability() -> Outcome {
    const MAX_MOVES: usize = 100_000;
    let mut rng = seed::rng(606);
    let mix = MoveMix::method_one(4.0, netrobust_core::neighborhood::DEFAULT_DELTA).unwrap();
    let mut reached = 0;
    let mut steps = Vec::new();
    for _ in 0..20 {
        let center = random_graphon(2, 0.2, 0.8, &mut rng);
        let nb = Neighborhood::new(center, 0.2, KlPolicy::ExactOnly).unwrap();
        let mut state = inside_state(&nb, &mut rng);
        let target = inside_state(&nb, &mut rng);
        for k in 1..=MAX_MOVES {
            if let Proposal::Inside { state: next, .. } = nb.propose(&state, &mix, &mut rng).unwrap() {
                state = next;
            }
            if linf(state.graphon(), target.graphon()) <= 0.05 {
                reached += 1;
                steps.push(k);
                break;
            }
        }
    }
    steps.sort_unstable();
    let median = steps.get(steps.len() / 2).copied().unwrap_or(0);
    Outcome { passed: reached >= 19, detail: format!("{reached}/20 pairs connected, median {median} proposals") }
}

fn metropolis() -> Outcome {
    let mut rng = seed::rng(707);
    let mut passed = true;
    let mut detail = Vec::new();
    for (dh, t) in [(-0.5, 1.0), (-3e-6, 2e-6)] {
        let trials = 10_000;
        let hits = (0..trials).filter(|_| metropolis_accept(dh, t, &mut rng)).count();
        let p = (dh / t).exp();
        let freq = hits as f64 / trials as f64;
        let z = (freq - p).abs() / (p * (1.0 - p) / trials as f64).sqrt();
        passed &= z <= 3.0;
        detail.push(format!("dh={dh} T={t}: {freq:.4} vs {p:.4} ({z:.2} SE)"));
    }
    Outcome { passed, detail: detail.join(", ") }
}

fn hash_tree(dir: &Path) -> BTreeMap<String, String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, hex::encode(Sha256::digest(std::fs::read(&path).unwrap())));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

const DETERMINISM_CONFIG: &str = r#"
name = "er"
seed = 8
n_nodes = 30
features = ["density", "blocks"]
radius = 0.3
replicates = 4
brute_force_models = 300

[center]
kind = "flat"
n = 3
p = 0.4

[annealing]
n_iters = 150
cooling = { kind = "geometric", factor = 0.9, every = 10 }
t0 = { kind = "auto_median", n_samples = 5 }
objective = "monte_carlo"
budget = { n_param_samples = 20, n_graphs_per_param = 5 }
report_budget = { n_param_samples = 50, n_graphs_per_param = 10 }
"#;

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let run = |sub: &str, threads: usize| {
        let mut cfg: ExperimentConfig = toml::from_str(DETERMINISM_CONFIG).unwrap();
        cfg.output_dir = Some(tmp.path().join(sub));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let dir = pool.install(|| run_experiment(&cfg)).unwrap();
        hash_tree(&dir)
    };
    let a = run("a", 1);
    let b = run("b", 4);
    let identical = a == b && a.len() > 10;
    Outcome { passed: identical, detail: format!("{} files, identical hashes across 1 and 4 threads: {identical}", a.len()) }
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("KL oracle equivalence", Duration::from_secs(60), kl_oracle),
        ("bootstrap divergence moments", Duration::from_secs(120), bootstrap_moments),
        ("analytic expected loss", Duration::from_secs(60), analytic_loss),
        ("annealing vs brute force", Duration::from_secs(1800), annealing_vs_brute_force),
        ("bisection recovers threshold", Duration::from_secs(1), bisection),
        ("reachability on 2x2 grids", Duration::from_secs(300), reachability),
        ("Metropolis acceptance law", Duration::from_secs(10), metropolis),
        ("bit-identical run directories", Duration::from_secs(600), determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let ok = out.passed && elapsed <= limit;
        failed += usize::from(!ok);
        println!(
            "criterion {} {}: {} [{:.1}s, limit {}s] {}",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            out.detail
        );
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
