//! End-to-end runs: worst-case search over replicates and the radius search.
//!
//! Seeds derive from the master seed by path: feature `f` uses
//! `[1, f]` for its annealing replicates (replicate `r` then takes
//! `derive(·, r)`), `[2, f]` for brute force, `[3, f]` for the center loss and
//! `[4, f]` for the radius search.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use netrobust_core::loss::expected_loss_exact;
use netrobust_core::radius::{threshold_stub, AnnealingDiagnostic, Decision};
use netrobust_core::{
    anneal, brute_force_scan, expected_loss, seed, BruteForceConfig, LossEstimate, Neighborhood, RadiusSearchConfig,
    Regime, RobustnessDiagnostic, StepGraphon,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, FeatureName, ObjectiveName};
use crate::output::{self, FeatureSeeds, Manifest, StoredTrace};
use crate::CliError;

const REPLICATE_STREAM: u64 = 1;
const BRUTE_FORCE_STREAM: u64 = 2;
const CENTER_STREAM: u64 = 3;
const SEARCH_STREAM: u64 = 4;

fn feature_label(cfg: &ExperimentConfig, name: FeatureName) -> &'static str {
    name.feature(cfg.block_tol).name()
}

/// SHA-256 over the canonical config (without the output directory, which
/// does not affect results) and the center model.
pub fn config_hash(cfg: &ExperimentConfig, center: &StepGraphon) -> String {
    let mut canonical = cfg.clone();
    canonical.output_dir = None;
    let text = serde_json::to_string(&canonical).expect("config serializes") + "\n" + &center.to_text();
    output::sha256_hex(text.as_bytes())
}

fn build_manifest(cfg: &ExperimentConfig, command: &str, hash: String) -> Manifest {
    let features = cfg
        .features
        .iter()
        .enumerate()
        .map(|(fi, &name)| {
            let fi = fi as u64;
            let rep_root = seed::derive_path(cfg.seed, &[REPLICATE_STREAM, fi]);
            FeatureSeeds {
                feature: feature_label(cfg, name).to_string(),
                center_seed: seed::derive_path(cfg.seed, &[CENTER_STREAM, fi]),
                brute_force_seed: seed::derive_path(cfg.seed, &[BRUTE_FORCE_STREAM, fi]),
                search_seed: seed::derive_path(cfg.seed, &[SEARCH_STREAM, fi]),
                replicate_seeds: (0..cfg.replicates as u64).map(|r| seed::derive(rep_root, r)).collect(),
            }
        })
        .collect();
    Manifest { name: cfg.name.clone(), command: command.to_string(), config_hash: hash, master_seed: cfg.seed, method: cfg.method, features }
}

/// Validates, creates the run directory and reconciles it with any manifest
/// already there.
fn prepare(cfg: &ExperimentConfig, command: &str) -> Result<(StepGraphon, PathBuf, Manifest), CliError> {
    let center = cfg.validate()?;
    let dir = cfg
        .output_dir
        .clone()
        .ok_or_else(|| CliError::Config("field `output_dir`: not set (pass --out)".into()))?;
    std::fs::create_dir_all(dir.join("traces")).map_err(|e| CliError::io(&dir, e))?;
    let manifest = build_manifest(cfg, command, config_hash(cfg, &center));
    let path = dir.join("manifest.json");
    match output::read_manifest(&path)? {
        Some(old) if old != manifest => {
            return Err(CliError::Config(format!(
                "{} holds a run with a different configuration or seed ({} vs {})",
                dir.display(),
                old.config_hash,
                manifest.config_hash
            )))
        }
        Some(_) => {}
        None => output::write_manifest(&path, &manifest)?,
    }
    Ok((center, dir, manifest))
}

fn center_loss(cfg: &ExperimentConfig, center: &StepGraphon, name: FeatureName, seed: u64) -> Result<LossEstimate, CliError> {
    let regime = Regime::new(name.feature(cfg.block_tol), cfg.n_nodes, cfg.annealing.report_budget)?;
    Ok(match cfg.annealing.objective {
        ObjectiveName::Exact => expected_loss_exact(center, &regime)?,
        ObjectiveName::MonteCarlo => expected_loss(center, &regime, seed)?,
    })
}

fn write_center_losses(cfg: &ExperimentConfig, center: &StepGraphon, dir: &Path, manifest: &Manifest) -> Result<(), CliError> {
    let path = dir.join("center_loss.csv");
    if path.exists() {
        return Ok(());
    }
    let mut out = String::from("feature,n_nodes,expected_loss,variance_term,bias_sq_term,std_error,n_param_samples,n_graphs_per_param\n");
    for (&name, seeds) in cfg.features.iter().zip(&manifest.features) {
        let l = center_loss(cfg, center, name, seeds.center_seed)?;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            seeds.feature, cfg.n_nodes, l.expected_loss, l.variance_term, l.bias_sq_term, l.std_error, l.n_param_samples, l.n_graphs_per_param
        );
    }
    output::write_atomic(&path, &out)
}

/// Runs every missing annealing replicate and brute-force scan, then derives
/// all tables from the persisted files. Existing complete files are kept, so
/// an interrupted run resumes where it stopped.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let (center, dir, manifest) = prepare(cfg, "run")?;
    write_center_losses(cfg, &center, &dir, &manifest)?;
    if cfg.replicates == 0 {
        return Ok(dir);
    }

    let nbhd = Neighborhood::new(center.clone(), cfg.radius, cfg.policy())?;
    let annealing = cfg.annealing_config(center.resolution())?;
    let rows = annealing.n_iters + 1;

    let jobs: Vec<(usize, usize)> = (0..cfg.features.len())
        .flat_map(|fi| (0..cfg.replicates).map(move |r| (fi, r)))
        .filter(|&(fi, r)| output::load_trace(&output::trace_path(&dir, &manifest.features[fi].feature, r), rows).is_none())
        .collect();
    jobs.par_iter().try_for_each(|&(fi, r)| -> Result<(), CliError> {
        let seeds = &manifest.features[fi];
        let regime = cfg.regime(cfg.features[fi])?;
        let trace = anneal(&nbhd, &regime, &annealing, seeds.replicate_seeds[r])?;
        output::write_atomic(&output::trace_path(&dir, &seeds.feature, r), &output::trace_csv(&trace.records))
    })?;

    if cfg.brute_force_models > 0 {
        for (fi, seeds) in manifest.features.iter().enumerate() {
            let path = dir.join(format!("bruteforce_{}.txt", seeds.feature));
            if path.exists() {
                continue;
            }
            let regime = cfg.regime(cfg.features[fi])?;
            let bf = BruteForceConfig {
                n_models: cfg.brute_force_models,
                move_mix: annealing.move_mix.clone(),
                evaluator: annealing.evaluator,
            };
            let mut losses = Vec::with_capacity(cfg.brute_force_models);
            brute_force_scan(&nbhd, &regime, &bf, seeds.brute_force_seed, |_, l| losses.push(l))?;
            output::write_atomic(&path, &output::values_text(&losses))?;
        }
    }

    write_tables(cfg, &dir, &manifest, rows)?;
    Ok(dir)
}

fn write_tables(cfg: &ExperimentConfig, dir: &Path, manifest: &Manifest, rows: usize) -> Result<(), CliError> {
    let mut summary = String::from(
        "regime,feature,method,radius,replicates,brute_force_models,brute_force_max,sa_mean,sa_variance,sa_best,center_objective\n",
    );
    let mut scores_header = String::from("regime,radius,method");
    let mut scores_row = format!("{},{},{}", cfg.name, cfg.radius, cfg.method);

    for seeds in &manifest.features {
        let traces: Vec<StoredTrace> = (0..cfg.replicates)
            .map(|r| {
                let p = output::trace_path(dir, &seeds.feature, r);
                output::load_trace(&p, rows).ok_or_else(|| CliError::Config(format!("trace {} is missing or malformed", p.display())))
            })
            .collect::<Result<_, _>>()?;

        let bests: Vec<f64> = traces.iter().map(StoredTrace::best_objective).collect();
        let (mean, var) = output::mean_variance(&bests);
        let sa_best = bests.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let (bf_models, bf_max) = if cfg.brute_force_models > 0 {
            let p = dir.join(format!("bruteforce_{}.txt", seeds.feature));
            let text = std::fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
            let losses = output::parse_values(&text)
                .ok_or_else(|| CliError::Config(format!("brute-force file {} is malformed", p.display())))?;
            let max = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (losses.len().to_string(), max.to_string())
        } else {
            (String::new(), String::new())
        };

        // normalized scores relative to each chain's own center evaluation
        let mut scores = Vec::new();
        let mut worst = f64::NEG_INFINITY;
        for t in &traces {
            let c0 = t.center_objective();
            if c0 == 0.0 {
                return Err(netrobust_core::Error::CenterLossZero.into());
            }
            scores.extend(t.visited_objectives().into_iter().map(|v| (v - c0) / c0));
            worst = worst.max((t.best_objective() - c0) / c0);
        }
        output::write_atomic(&dir.join(format!("scores_{}.txt", seeds.feature)), &output::values_text(&scores))?;

        let center_objective = traces[0].center_objective();
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{},{},{},{}",
            cfg.name, seeds.feature, cfg.method, cfg.radius, cfg.replicates, bf_models, bf_max, mean, var, sa_best, center_objective
        );
        let _ = write!(scores_header, ",{}_score", seeds.feature);
        let _ = write!(scores_row, ",{worst}");
    }
    output::write_atomic(&dir.join("summary.csv"), &summary)?;
    output::write_atomic(&dir.join("worst_scores.csv"), &format!("{scores_header}\n{scores_row}\n"))
}

/// Smallest not-robust radius and the largest robust radius below it, from
/// the probe log.
fn summarize_probes(probes: &[(f64, Decision)]) -> Option<(f64, Option<f64>)> {
    let radius = probes.iter().filter(|(_, d)| !d.is_robust()).map(|p| p.0).fold(None, |m: Option<f64>, c| Some(m.map_or(c, |m| m.min(c))))?;
    let below = probes.iter().filter(|(c, d)| d.is_robust() && *c < radius).map(|p| p.0).fold(None, |m: Option<f64>, c| Some(m.map_or(c, |m| m.max(c))));
    Some((radius, below))
}

const SEARCH_LOG_HEADER: &str = "radius,decision,score";

fn parse_search_log(text: &str) -> Option<Vec<(f64, Decision)>> {
    let mut lines = text.lines();
    if lines.next()? != SEARCH_LOG_HEADER {
        return None;
    }
    lines
        .map(|l| {
            let mut f = l.split(',');
            let c: f64 = f.next()?.parse().ok()?;
            let label = f.next()?;
            let score: f64 = f.next()?.parse().ok()?;
            let d = match label {
                "robust" => Decision::Robust { score },
                "not_robust" => Decision::NotRobust { score },
                _ => return None,
            };
            Some((c, d))
        })
        .collect()
}

/// Minimal not-robust radius per feature. Writes `search_<feature>.log`
/// (one probe per line) and `radius_search.csv`.
pub fn run_radius_search(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let (center, dir, manifest) = prepare(cfg, "radius-search")?;
    let rs = &cfg.radius_search;
    let search = RadiusSearchConfig { c_init: rs.c_init, k_iters: rs.k_iters };
    let annealing = cfg.annealing_config(center.resolution())?;

    let mut table = String::from("regime,feature,method,min_nonrobust_radius,max_robust_radius,probes\n");
    for (fi, seeds) in manifest.features.iter().enumerate() {
        let path = dir.join(format!("search_{}.log", seeds.feature));
        let probes = match std::fs::read_to_string(&path).ok().and_then(|t| parse_search_log(&t)) {
            Some(p) => p,
            None => {
                let diag: Box<dyn RobustnessDiagnostic> = match rs.stub_threshold {
                    Some(t) => Box::new(threshold_stub(t)),
                    None => Box::new(AnnealingDiagnostic {
                        center: center.clone(),
                        policy: cfg.policy(),
                        regime: cfg.regime(cfg.features[fi])?,
                        annealing: annealing.clone(),
                        theta_score: rs.theta_score,
                    }),
                };
                let result = netrobust_core::min_nonrobust_radius(diag.as_ref(), &search, seeds.search_seed)?;
                let text = std::iter::once(SEARCH_LOG_HEADER.to_string()).chain(result.log_lines()).collect::<Vec<_>>().join("\n") + "\n";
                output::write_atomic(&path, &text)?;
                result.probes.iter().map(|p| (p.radius, p.decision)).collect()
            }
        };
        let (radius, below) = summarize_probes(&probes)
            .ok_or_else(|| CliError::Config(format!("search log {} has no not-robust probe", path.display())))?;
        let below = below.map(|b| b.to_string()).unwrap_or_default();
        let _ = writeln!(table, "{},{},{},{radius},{below},{}", cfg.name, seeds.feature, cfg.method, probes.len());
    }
    output::write_atomic(&dir.join("radius_search.csv"), &table)?;
    Ok(dir)
}
