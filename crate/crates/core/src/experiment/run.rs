//! Per-seed experiment pipeline: data → ensemble training → uniform, reweighted,
//! best-head and fine-tuned scores at every budget point.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, TaskSpec};
use crate::active::{adapt_on_outputs, Pool};
use crate::ensemble::{build_ensemble, EnsembleModel, TrainConfig};
use crate::error::{Error, Result, StageExt};
use crate::hyre::{
    best_head_from_outputs, per_point_losses, weighted_combine, BeliefState, Combine, PointLoss,
};
use crate::nn::Matrix;
use crate::rng::{self, sub_seed};
use crate::tasks::{
    gen_conflicting_preferences, gen_hypercube_task_sized, load_table, ood_split, sample_gp_dataset,
    uniform_box, Dataset, SplitSpec, TableSchema, Targets,
};

// Seed streams derived from each run seed.
const MODEL_STREAM: u64 = 11;
const TRAIN_STREAM: u64 = 12;
const POOL_STREAM: u64 = 13;
const FINETUNE_STREAM: u64 = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Rmse,
    Accuracy,
}

impl Metric {
    pub fn higher_is_better(self) -> bool {
        self == Metric::Accuracy
    }

    /// Whether `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        if self.higher_is_better() {
            a > b
        } else {
            a < b
        }
    }
}

/// How combined predictions are turned into a score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scoring {
    pub metric: Metric,
    pub combine: Combine,
}

impl Scoring {
    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        if cfg.is_regression() {
            Scoring {
                metric: Metric::Rmse,
                combine: Combine::Raw,
            }
        } else {
            Scoring {
                metric: Metric::Accuracy,
                combine: cfg.adapt.combine,
            }
        }
    }

    /// Scores a belief-weighted combination of `K × N` head outputs against `eval`.
    pub fn score(&self, outputs: &Matrix, weights: &[f64], eval: &Dataset) -> Result<f64> {
        let pred = weighted_combine(outputs, weights, self.combine)?;
        self.score_predictions(&pred, eval)
    }

    pub fn score_predictions(&self, pred: &[f64], eval: &Dataset) -> Result<f64> {
        if pred.len() != eval.len() || eval.is_empty() {
            return Err(Error::invalid("predictions do not match the evaluation set"));
        }
        let n = pred.len() as f64;
        match (&eval.targets, self.metric) {
            (Targets::Real(y), Metric::Rmse) => {
                Ok((pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n).sqrt())
            }
            (Targets::Binary(y), Metric::Accuracy) => {
                let threshold = match self.combine {
                    Combine::Probabilities => 0.5,
                    Combine::Raw => 0.0,
                };
                // A prediction exactly on the threshold counts as wrong.
                let correct = pred
                    .iter()
                    .zip(y)
                    .filter(|(p, t)| **p != threshold && (**p > threshold) == **t)
                    .count();
                Ok(correct as f64 / n)
            }
            _ => Err(Error::invalid("metric does not match the evaluation targets")),
        }
    }
}

/// Training data, the unlabeled query pool (with hidden labels) and the labeled target
/// evaluation set for one seed.
#[derive(Clone, Debug)]
pub struct TaskData {
    pub train: Dataset,
    pub pool: Dataset,
    pub eval: Dataset,
}

pub fn prepare_task(cfg: &ExperimentConfig, seed: u64) -> Result<TaskData> {
    match &cfg.task {
        TaskSpec::Gp { kernel, n_train, n_test } => {
            let s = sample_gp_dataset(kernel, *n_train, *n_test, 1, seed)?;
            let target = s.posterior_draws.row(0);
            let part = |parity: usize| -> Result<Dataset> {
                let idx: Vec<usize> = (0..*n_test).filter(|i| i % 2 == parity).collect();
                Dataset::regression(s.test_inputs.select_rows(&idx), idx.iter().map(|&i| target[i]).collect())
            };
            Ok(TaskData {
                train: s.train.clone(),
                pool: part(0)?,
                eval: part(1)?,
            })
        }
        TaskSpec::Conflicting {
            n_labelers,
            n_points,
            n_pool,
            n_eval,
        } => {
            let t = gen_conflicting_preferences(*n_labelers, *n_points, seed)?;
            let mut r = rng::seeded(sub_seed(seed, POOL_STREAM));
            let pool = t.held_out.labeled(uniform_box(*n_pool, 2, 0.0, 1.0, &mut r));
            let eval = t.held_out.labeled(uniform_box(*n_eval, 2, 0.0, 1.0, &mut r));
            Ok(TaskData {
                train: t.train,
                pool,
                eval,
            })
        }
        TaskSpec::Hypercube { n_train, n_target } => {
            let t = gen_hypercube_task_sized(*n_train, *n_target, seed)?;
            let half = n_target / 2;
            let pool: Vec<usize> = (0..half).collect();
            let eval: Vec<usize> = (half..*n_target).collect();
            Ok(TaskData {
                train: t.train,
                pool: t.target.select(&pool),
                eval: t.target.select(&eval),
            })
        }
        TaskSpec::Uci {
            table,
            schema,
            ood_fraction,
            train_fraction,
        } => {
            let schema = TableSchema::load(schema)?;
            let data = load_table(table, &schema)?;
            let split = ood_split(
                &data,
                &SplitSpec {
                    ood_fraction: *ood_fraction,
                    train_fraction: *train_fraction,
                    seed,
                },
            )?;
            Ok(TaskData {
                train: split.train,
                pool: split.ood.clone(),
                eval: split.ood,
            })
        }
    }
}

pub fn train_model(cfg: &ExperimentConfig, train: &Dataset, seed: u64) -> Result<EnsembleModel> {
    let mut model = build_ensemble(&cfg.ensemble_config(train.dim(), sub_seed(seed, MODEL_STREAM)))?;
    model.train(train, &cfg.train_config(sub_seed(seed, TRAIN_STREAM)))?;
    Ok(model)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub uniform: f64,
    pub best_head: f64,
    pub best_head_index: usize,
    /// One entry per configured budget.
    pub hyre: Vec<f64>,
    /// One entry per configured budget; `None` when fine-tuning is disabled.
    pub finetune: Vec<Option<f64>>,
    /// Pool indices in query order, up to the largest budget.
    pub queries: Vec<usize>,
}

/// Clones `model`, trains the clone on `train ∪ adaptation` for `tc.steps` steps and
/// scores it with uniform weights on `eval`. The original is left untouched.
pub fn finetune_baseline(
    model: &EnsembleModel,
    train: &Dataset,
    adaptation: &Dataset,
    tc: &TrainConfig,
    eval: &Dataset,
    scoring: Scoring,
) -> Result<f64> {
    let uniform = vec![1.0 / model.heads() as f64; model.heads()];
    if tc.steps == 0 {
        return scoring.score(&model.forward(&eval.x)?, &uniform, eval);
    }
    if adaptation.is_empty() {
        return Err(Error::invalid("fine-tuning needs adaptation data"));
    }
    let mut clone = model.clone();
    clone.train(&train.concat(adaptation)?, tc)?;
    scoring.score(&clone.forward(&eval.x)?, &uniform, eval)
}

/// Runs the full pipeline for one seed.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedResult> {
    let data = prepare_task(cfg, seed).stage("data")?;
    let model = train_model(cfg, &data.train, seed).stage("train")?;
    evaluate_seed(cfg, seed, &model, &data)
}

pub fn evaluate_seed(cfg: &ExperimentConfig, seed: u64, model: &EnsembleModel, data: &TaskData) -> Result<SeedResult> {
    let scoring = Scoring::for_config(cfg);
    let k = model.heads();
    let pool_out = model.forward(&data.pool.x).stage("evaluate")?;
    let eval_out = model.forward(&data.eval.x).stage("evaluate")?;
    let uniform_w = vec![1.0 / k as f64; k];
    let uniform = scoring.score(&eval_out, &uniform_w, &data.eval).stage("evaluate")?;

    let loss = if cfg.is_regression() {
        PointLoss::SquaredError
    } else {
        PointLoss::ZeroOne(cfg.adapt.tie_policy)
    };
    let best_head_index = best_head_from_outputs(&eval_out, &data.eval, loss).stage("evaluate")?;
    let mut one_hot = vec![0.0; k];
    one_hot[best_head_index] = 1.0;
    let best_head = scoring.score(&eval_out, &one_hot, &data.eval).stage("evaluate")?;

    let max_budget = cfg.budgets.iter().copied().max().unwrap_or(0);
    let initial = BeliefState::uniform(k)
        .and_then(|b| b.with_temperature(cfg.adapt.temperature))
        .stage("adapt")?;
    let mut pool = Pool::new(data.pool.clone(), max_budget).stage("adapt")?;
    let run = adapt_on_outputs(&pool_out, &mut pool, max_budget, cfg.criterion(seed), loss, initial.clone())
        .stage("adapt")?;
    let queries = run.log.indices();

    // Greedy selection is deterministic, so a run with budget B queries exactly the
    // first B points of the longest run; beliefs at smaller budgets are its prefixes.
    let per_point = per_point_losses(&pool_out, &data.pool, loss).stage("adapt")?;
    let mut hyre = Vec::with_capacity(cfg.budgets.len());
    let mut finetune = Vec::with_capacity(cfg.budgets.len());
    for (bi, &b) in cfg.budgets.iter().enumerate() {
        let totals: Vec<f64> = (0..k)
            .map(|h| queries[..b].iter().map(|&i| per_point.get(h, i)).sum())
            .collect();
        let mut belief = initial.clone();
        belief.accumulate(&totals).stage("adapt")?;
        hyre.push(scoring.score(&eval_out, &belief.weights(), &data.eval).stage("adapt")?);

        finetune.push(if cfg.adapt.finetune_steps == 0 {
            None
        } else {
            let mut tc = cfg.train_config(sub_seed(seed, FINETUNE_STREAM + bi as u64));
            tc.steps = if b == 0 { 0 } else { cfg.adapt.finetune_steps };
            let revealed = data.pool.select(&queries[..b]);
            Some(finetune_baseline(model, &data.train, &revealed, &tc, &data.eval, scoring).stage("finetune")?)
        });
    }
    Ok(SeedResult {
        seed,
        uniform,
        best_head,
        best_head_index,
        hyre,
        finetune,
        queries,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (0 for a single value).
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, std, n }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub uniform: Stat,
    pub best_head: Stat,
    pub hyre: Vec<Stat>,
    pub finetune: Vec<Option<Stat>>,
}

impl Aggregate {
    pub fn of(seeds: &[SeedResult], n_budgets: usize) -> Self {
        let col = |f: &dyn Fn(&SeedResult) -> f64| Stat::of(&seeds.iter().map(f).collect::<Vec<_>>());
        Aggregate {
            uniform: col(&|s| s.uniform),
            best_head: col(&|s| s.best_head),
            hyre: (0..n_budgets).map(|b| col(&|s| s.hyre[b])).collect(),
            finetune: (0..n_budgets)
                .map(|b| {
                    let v: Option<Vec<f64>> = seeds.iter().map(|s| s.finetune[b]).collect();
                    v.map(|v| Stat::of(&v))
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub config_hash: String,
    pub metric: Metric,
    pub budgets: Vec<usize>,
    pub seeds: Vec<SeedResult>,
    pub aggregate: Aggregate,
    pub wall_clock_seconds: f64,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let seeds = cfg
        .seeds
        .iter()
        .map(|&s| run_seed(cfg, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunReport {
        name: cfg.name.clone(),
        config_hash: cfg.hash(),
        metric: Scoring::for_config(cfg).metric,
        budgets: cfg.budgets.clone(),
        aggregate: Aggregate::of(&seeds, cfg.budgets.len()),
        seeds,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}
