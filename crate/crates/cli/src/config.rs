//! Experiment configuration, read from TOML.
//!
//! ```toml
//! name = "er"
//! seed = 7
//! n_nodes = 100
//! features = ["density", "blocks"]
//! radius = 0.2
//! method = 1
//! replicates = 100
//!
//! [center]
//! kind = "flat"
//! n = 20
//! p = 0.5
//!
//! [annealing]
//! n_iters = 2000
//! ```

use std::path::{Path, PathBuf};

use netrobust_core::annealing::{AnnealingConfig, Cooling, InitialTemperature};
use netrobust_core::{GraphFeature, KlPolicy, LossEvaluator, MoveMix, RadiusSearchConfig, Regime, SampleBudget, StepGraphon};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Run directory; relative paths resolve against the working directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub center: CenterSpec,
    pub n_nodes: usize,
    pub features: Vec<FeatureName>,
    #[serde(default = "default_block_tol")]
    pub block_tol: f64,
    pub radius: f64,
    #[serde(default = "default_method")]
    pub method: u8,
    #[serde(default)]
    pub replicates: usize,
    #[serde(default)]
    pub policy: PolicyName,
    #[serde(default)]
    pub moves: MoveParams,
    #[serde(default)]
    pub annealing: AnnealingParams,
    #[serde(default)]
    pub brute_force_models: usize,
    #[serde(default)]
    pub radius_search: RadiusSearchParams,
}

fn default_block_tol() -> f64 {
    netrobust_core::graphon::DEFAULT_BLOCK_TOL
}

fn default_method() -> u8 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CenterSpec {
    Flat { n: usize, p: f64 },
    Sbm { n: usize, blocks: Vec<Vec<f64>> },
    /// Step-graphon text file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureName {
    Density,
    Blocks,
    AverageDegree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    #[default]
    Exact,
    Filter,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoveParams {
    /// Perturb concentration; defaults to `n²`.
    pub kappa: Option<f64>,
    /// Rescale half-width.
    pub delta: Option<f64>,
    /// Bootstrap concentration; defaults to `n²`.
    pub alpha_n: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveName {
    #[default]
    MonteCarlo,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealingParams {
    pub n_iters: usize,
    pub cooling: Cooling,
    pub t0: InitialTemperature,
    pub objective: ObjectiveName,
    /// Loss budget inside the search loop.
    pub budget: SampleBudget,
    /// Loss budget for the center model's reported loss.
    pub report_budget: SampleBudget,
}

impl Default for AnnealingParams {
    fn default() -> Self {
        AnnealingParams {
            n_iters: 1000,
            cooling: Cooling::default(),
            t0: InitialTemperature::AutoMedian { n_samples: 21 },
            objective: ObjectiveName::MonteCarlo,
            budget: SampleBudget::SEARCH,
            report_budget: SampleBudget::FULL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusSearchParams {
    pub c_init: f64,
    pub k_iters: usize,
    pub theta_score: f64,
    /// Replaces the annealing diagnostic with one that flips exactly at this
    /// radius (for testing the search itself).
    pub stub_threshold: Option<f64>,
}

impl Default for RadiusSearchParams {
    fn default() -> Self {
        RadiusSearchParams { c_init: 1.0, k_iters: 100, theta_score: 1.0, stub_threshold: None }
    }
}

impl FeatureName {
    pub fn feature(&self, block_tol: f64) -> GraphFeature {
        match self {
            FeatureName::Density => GraphFeature::Density,
            FeatureName::Blocks => GraphFeature::BlockCount { tol: block_tol },
            FeatureName::AverageDegree => GraphFeature::AverageDegree,
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub replicates: Option<usize>,
    pub method: Option<u8>,
}

fn invalid(field: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("field `{field}`: {message}"))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // file references are relative to the config file
        if let CenterSpec::File { path: p } = &mut cfg.center {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(out) = &o.out {
            self.output_dir = Some(out.clone());
        }
        if let Some(r) = o.replicates {
            self.replicates = r;
        }
        if let Some(m) = o.method {
            self.method = m;
        }
    }

    /// Checks every field and builds the center model.
    pub fn validate(&self) -> Result<StepGraphon, CliError> {
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        if self.features.is_empty() {
            return Err(invalid("features", "at least one feature is required"));
        }
        if self.n_nodes < 2 {
            return Err(invalid("n_nodes", "must be at least 2"));
        }
        if !(self.block_tol >= 0.0) {
            return Err(invalid("block_tol", "must be non-negative"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(invalid("radius", "must be positive and finite"));
        }
        if self.method != 1 && self.method != 2 {
            return Err(invalid("method", format!("{} is not 1 or 2", self.method)));
        }
        let center = self.center_graphon()?;
        self.move_mix(center.resolution()).map_err(|e| invalid("moves", e))?;
        self.annealing_config(center.resolution())
            .and_then(|a| a.validate().map(|_| a))
            .map_err(|e| invalid("annealing", e))?;
        for name in &self.features {
            Regime::new(name.feature(self.block_tol), self.n_nodes, self.annealing.budget).map_err(|e| invalid("annealing.budget", e))?;
            Regime::new(name.feature(self.block_tol), self.n_nodes, self.annealing.report_budget)
                .map_err(|e| invalid("annealing.report_budget", e))?;
            if self.annealing.objective == ObjectiveName::Exact && *name == FeatureName::Blocks {
                return Err(invalid("annealing.objective", "the exact objective does not support the blocks feature"));
            }
        }
        let rs = &self.radius_search;
        RadiusSearchConfig { c_init: rs.c_init, k_iters: rs.k_iters }
            .validate()
            .map_err(|e| invalid("radius_search", e))?;
        if !(rs.theta_score > 0.0) {
            return Err(invalid("radius_search.theta_score", "must be positive"));
        }
        if let Some(t) = rs.stub_threshold {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid("radius_search.stub_threshold", "must be positive"));
            }
        }
        Ok(center)
    }

    pub fn center_graphon(&self) -> Result<StepGraphon, CliError> {
        match &self.center {
            CenterSpec::Flat { n, p } => StepGraphon::flat(*n, *p).map_err(|e| invalid("center", e)),
            CenterSpec::Sbm { n, blocks } => StepGraphon::sbm(blocks, *n).map_err(|e| invalid("center", e)),
            CenterSpec::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| invalid("center.path", format!("cannot read {}: {e}", path.display())))?;
                StepGraphon::from_text(&text).map_err(|e| invalid("center.path", e))
            }
        }
    }

    pub fn kappa(&self, n: usize) -> f64 {
        self.moves.kappa.unwrap_or((n * n) as f64)
    }

    pub fn alpha_n(&self, n: usize) -> f64 {
        self.moves.alpha_n.unwrap_or((n * n) as f64)
    }

    pub fn delta(&self) -> f64 {
        self.moves.delta.unwrap_or(netrobust_core::neighborhood::DEFAULT_DELTA)
    }

    pub fn move_mix(&self, n: usize) -> netrobust_core::Result<MoveMix> {
        match self.method {
            2 => MoveMix::method_two(self.alpha_n(n)),
            _ => MoveMix::method_one(self.kappa(n), self.delta()),
        }
    }

    pub fn policy(&self) -> KlPolicy {
        match self.policy {
            PolicyName::Exact => KlPolicy::ExactOnly,
            PolicyName::Filter => KlPolicy::FilterThenExact,
        }
    }

    pub fn evaluator(&self) -> LossEvaluator {
        match self.annealing.objective {
            ObjectiveName::MonteCarlo => LossEvaluator::MonteCarlo { budget: self.annealing.budget },
            ObjectiveName::Exact => LossEvaluator::Exact,
        }
    }

    pub fn annealing_config(&self, n: usize) -> netrobust_core::Result<AnnealingConfig> {
        Ok(AnnealingConfig {
            n_iters: self.annealing.n_iters,
            cooling: self.annealing.cooling,
            t0: self.annealing.t0,
            move_mix: self.move_mix(n)?,
            evaluator: self.evaluator(),
            record_states: false,
        })
    }

    pub fn regime(&self, name: FeatureName) -> netrobust_core::Result<Regime> {
        Regime::new(name.feature(self.block_tol), self.n_nodes, self.annealing.budget)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        name = "er"
        n_nodes = 50
        features = ["density"]
        radius = 0.2
        [center]
        kind = "flat"
        n = 4
        p = 0.5
    "#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        assert_eq!(cfg.method, 1);
        assert_eq!(cfg.replicates, 0);
        let center = cfg.validate().unwrap();
        assert_eq!(center.resolution(), 4);
        assert_eq!(cfg.kappa(4), 16.0);
        assert_eq!(cfg.annealing.budget, SampleBudget::SEARCH);
    }

    #[test]
    fn field_errors_name_the_field() {
        let mut cfg: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        cfg.features.clear();
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("features"), "{msg}");

        let mut cfg: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        cfg.radius = -1.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("radius"));

        let mut cfg: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        cfg.method = 3;
        assert!(cfg.validate().unwrap_err().to_string().contains("method"));

        let bad = MINIMAL.replace("radius = 0.2", "radius = 0.2\nbogus = 1");
        assert!(toml::from_str::<ExperimentConfig>(&bad).is_err());
    }

    #[test]
    fn exact_objective_rejects_blocks() {
        let text = MINIMAL.replace("[\"density\"]", "[\"density\", \"blocks\"]") + "\n[annealing]\nn_iters = 10\ncooling = { kind = \"geometric\", factor = 0.9, every = 5 }\nt0 = { kind = \"fixed\", t0 = 1e-4 }\nobjective = \"exact\"\nbudget = { n_param_samples = 1, n_graphs_per_param = 1 }\nreport_budget = { n_param_samples = 1, n_graphs_per_param = 1 }\n";
        let cfg: ExperimentConfig = toml::from_str(&text).unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("objective"));
    }

    #[test]
    fn overrides_win() {
        let mut cfg: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        cfg.apply(&Overrides { seed: Some(9), out: Some("x".into()), replicates: Some(4), method: Some(2) });
        assert_eq!((cfg.seed, cfg.replicates, cfg.method), (9, 4, 2));
        assert_eq!(cfg.output_dir, Some(PathBuf::from("x")));
        assert_eq!(cfg.move_mix(4).unwrap(), MoveMix::method_two(16.0).unwrap());
    }
}
