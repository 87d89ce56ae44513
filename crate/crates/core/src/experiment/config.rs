//! Declarative experiment description, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::active::QueryCriterion;
use crate::ensemble::{Architecture, EnsembleConfig, LossKind, TrainConfig};
use crate::error::{Error, Result};
use crate::hyre::{Combine, TiePolicy};
use crate::nn::{Activation, OptimizerConfig};
use crate::tasks::GpSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSpec {
    /// Regression on GP-prior data; one posterior draw per seed is the target function.
    Gp {
        #[serde(default)]
        kernel: GpSpec,
        #[serde(default = "defaults::gp_train")]
        n_train: usize,
        /// Grid points; even indices form the query pool, odd ones the evaluation set.
        #[serde(default = "defaults::gp_test")]
        n_test: usize,
    },
    /// Binary labels from a population of linear labelers; a held-out labeler is the target.
    Conflicting {
        #[serde(default = "defaults::labelers")]
        n_labelers: usize,
        #[serde(default = "defaults::points")]
        n_points: usize,
        #[serde(default = "defaults::pool")]
        n_pool: usize,
        #[serde(default = "defaults::eval")]
        n_eval: usize,
    },
    /// Orthant-labeled training data; a random boundary on the full cube is the target.
    Hypercube {
        #[serde(default = "defaults::cube_train")]
        n_train: usize,
        /// Split in half into query pool and evaluation set.
        #[serde(default = "defaults::cube_target")]
        n_target: usize,
    },
    /// A regression table with the feature-mean OOD split. The OOD rows are both the
    /// query pool and the evaluation set.
    Uci {
        table: PathBuf,
        schema: PathBuf,
        #[serde(default = "defaults::ood_fraction")]
        ood_fraction: f64,
        #[serde(default = "defaults::train_fraction")]
        train_fraction: f64,
    },
}

mod defaults {
    pub fn gp_train() -> usize {
        7
    }
    pub fn gp_test() -> usize {
        1000
    }
    pub fn labelers() -> usize {
        4
    }
    pub fn points() -> usize {
        1000
    }
    pub fn pool() -> usize {
        500
    }
    pub fn eval() -> usize {
        1000
    }
    pub fn cube_train() -> usize {
        512
    }
    pub fn cube_target() -> usize {
        2000
    }
    pub fn ood_fraction() -> f64 {
        0.05
    }
    pub fn train_fraction() -> f64 {
        0.8
    }
    pub fn budgets() -> Vec<usize> {
        vec![0, 1, 2, 4, 8, 16, 32]
    }
    pub fn seeds() -> Vec<u64> {
        (0..5).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub architecture: Architecture,
    pub heads: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub prior_scale: f64,
    pub index_dim: usize,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            architecture: Architecture::SharedBase,
            heads: 100,
            hidden: vec![50, 50],
            activation: Activation::Relu,
            prior_scale: 1.0,
            index_dim: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub steps: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 64,
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptSection {
    /// `entropy`, `bald`, `variance` or `random`; absent means variance for regression
    /// tasks and BALD for classification.
    pub criterion: Option<String>,
    pub temperature: f64,
    pub combine: Combine,
    pub tie_policy: TiePolicy,
    /// Gradient steps of the fine-tuning comparator; 0 disables it.
    pub finetune_steps: usize,
}

impl Default for AdaptSection {
    fn default() -> Self {
        Self {
            criterion: None,
            temperature: 1.0,
            combine: Combine::Probabilities,
            tie_policy: TiePolicy::CountAsError,
            finetune_steps: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub task: TaskSpec,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub adapt: AdaptSection,
    #[serde(default = "defaults::budgets")]
    pub budgets: Vec<usize>,
    #[serde(default = "defaults::seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(task: TaskSpec) -> Self {
        Self {
            name: String::new(),
            task,
            ensemble: EnsembleSection::default(),
            train: TrainSection::default(),
            adapt: AdaptSection::default(),
            budgets: defaults::budgets(),
            seeds: defaults::seeds(),
            out_dir: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative data paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let TaskSpec::Uci { table, schema, .. } = &mut cfg.task {
            for p in [table, schema] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.budgets.is_empty() {
            return bad("at least one budget is required".into());
        }
        if self.ensemble.heads == 0 || self.ensemble.hidden.contains(&0) {
            return bad("ensemble heads and hidden widths must be positive".into());
        }
        if !(self.ensemble.prior_scale >= 0.0) {
            return bad("prior scale must be non-negative".into());
        }
        if self.train.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.adapt.temperature > 0.0 && self.adapt.temperature.is_finite()) {
            return bad("temperature must be positive".into());
        }
        if let Some(c) = &self.adapt.criterion {
            QueryCriterion::parse(c).map_err(|e| Error::Config(e.to_string()))?;
        }
        match &self.task {
            TaskSpec::Uci {
                table,
                schema,
                ood_fraction,
                train_fraction,
            } => {
                for p in [table, schema] {
                    if !p.exists() {
                        return bad(format!("file {} does not exist", p.display()));
                    }
                }
                if !(*ood_fraction > 0.0 && *ood_fraction < 0.5 && *train_fraction > 0.0 && *train_fraction <= 1.0) {
                    return bad("split fractions out of range".into());
                }
            }
            TaskSpec::Gp { n_train, n_test, kernel } => {
                if *n_train == 0 || *n_test < 2 {
                    return bad("gp task needs training points and at least two grid points".into());
                }
                kernel.validate().map_err(|e| Error::Config(e.to_string()))?;
            }
            TaskSpec::Conflicting {
                n_labelers,
                n_points,
                n_pool,
                n_eval,
            } => {
                if [*n_labelers, *n_points, *n_pool, *n_eval].contains(&0) {
                    return bad("conflicting task sizes must be positive".into());
                }
            }
            TaskSpec::Hypercube { n_train, n_target } => {
                if *n_train < 2 || *n_target < 2 {
                    return bad("hypercube task sizes too small".into());
                }
            }
        }
        Ok(())
    }

    pub fn is_regression(&self) -> bool {
        matches!(self.task, TaskSpec::Gp { .. } | TaskSpec::Uci { .. })
    }

    pub fn loss(&self) -> LossKind {
        if self.is_regression() {
            LossKind::Mse
        } else {
            LossKind::BinaryCrossEntropy
        }
    }

    /// Criterion for a given run seed. Random selection draws its own stream from the seed.
    pub fn criterion(&self, seed: u64) -> QueryCriterion {
        let parsed = match &self.adapt.criterion {
            Some(c) => QueryCriterion::parse(c).expect("validated"),
            None if self.is_regression() => QueryCriterion::Variance,
            None => QueryCriterion::Bald,
        };
        match parsed {
            QueryCriterion::Random { seed: s } => QueryCriterion::Random {
                seed: crate::rng::sub_seed(seed, 0x5eed ^ s),
            },
            other => other,
        }
    }

    pub fn ensemble_config(&self, input_dim: usize, seed: u64) -> EnsembleConfig {
        let e = &self.ensemble;
        EnsembleConfig {
            heads: e.heads,
            architecture: e.architecture,
            input_dim,
            hidden: e.hidden.clone(),
            activation: e.activation,
            prior_scale: e.prior_scale,
            index_dim: e.index_dim,
            seed,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            steps: self.train.steps,
            batch_size: self.train.batch_size,
            optimizer: self.train.optimizer,
            loss: self.loss(),
            seed,
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_toml_uses_defaults() {
        let cfg = ExperimentConfig::from_toml("[task]\nkind = \"hypercube\"\n").unwrap();
        assert_eq!(cfg.budgets, vec![0, 1, 2, 4, 8, 16, 32]);
        assert_eq!(cfg.seeds.len(), 5);
        assert_eq!(cfg.ensemble.heads, 100);
        assert_eq!(cfg.criterion(0), QueryCriterion::Bald);
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml("seeds = []\n[task]\nkind = \"gp\"\n").is_err());
        assert!(ExperimentConfig::from_toml("[task]\nkind = \"gp\"\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::from_toml("[task]\nkind = \"uci\"\ntable = \"/no/such\"\nschema = \"/no/such\"\n").is_err());
        assert!(ExperimentConfig::from_toml("[task]\nkind = \"gp\"\n[adapt]\ncriterion = \"best\"\n").is_err());
    }
}
