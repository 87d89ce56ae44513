//! Pool-based query selection and the budgeted reweighting loop.

use std::io::Write;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::criteria::{bald_scores, entropy_scores, probabilities, variance_scores};
use crate::ensemble::EnsembleModel;
use crate::error::{Error, Result};
use crate::hyre::{cumulative_head_losses, BeliefState, PointLoss};
use crate::nn::Matrix;
use crate::rng;
use crate::tasks::{Dataset, TaskKind, Targets};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum QueryCriterion {
    Entropy,
    Bald,
    Variance,
    Random { seed: u64 },
}

impl QueryCriterion {
    fn check(self, kind: TaskKind) -> Result<()> {
        let ok = match self {
            QueryCriterion::Variance => kind == TaskKind::Regression,
            QueryCriterion::Entropy | QueryCriterion::Bald => kind == TaskKind::Binary,
            QueryCriterion::Random { .. } => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("criterion {self:?} does not apply to {kind:?} data")))
        }
    }

    /// Parses `entropy`, `bald`, `variance`, `random` or `random:<seed>`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "entropy" => Ok(Self::Entropy),
            "bald" => Ok(Self::Bald),
            "variance" => Ok(Self::Variance),
            "random" => Ok(Self::Random { seed: 0 }),
            other => match other.strip_prefix("random:") {
                Some(seed) => seed
                    .parse()
                    .map(|seed| Self::Random { seed })
                    .map_err(|_| Error::invalid(format!("bad random seed in `{other}`"))),
                None => Err(Error::invalid(format!("unknown criterion `{other}`"))),
            },
        }
    }
}

/// Unlabeled inputs with hidden oracle labels revealed one query at a time.
#[derive(Clone, Debug)]
pub struct Pool {
    data: Dataset,
    queried: Vec<usize>,
    is_queried: Vec<bool>,
    budget: usize,
}

impl Pool {
    pub fn new(data: Dataset, budget: usize) -> Result<Self> {
        if data.kind() == TaskKind::Preference {
            return Err(Error::invalid("pools hold single labeled inputs, not preference pairs"));
        }
        if budget > data.len() {
            return Err(Error::invalid(format!(
                "budget {budget} exceeds pool size {}",
                data.len()
            )));
        }
        let n = data.len();
        Ok(Self {
            data,
            queried: Vec::new(),
            is_queried: vec![false; n],
            budget,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn kind(&self) -> TaskKind {
        self.data.kind()
    }

    pub fn inputs(&self) -> &Matrix {
        &self.data.x
    }

    pub fn queried(&self) -> &[usize] {
        &self.queried
    }

    pub fn remaining_budget(&self) -> usize {
        self.budget - self.queried.len()
    }

    pub fn is_queried(&self, i: usize) -> bool {
        self.is_queried[i]
    }

    /// Reveals the label of `i` and records the query, returning the label as a number
    /// (0/1 for binary pools).
    pub fn reveal(&mut self, i: usize) -> Result<f64> {
        if self.remaining_budget() == 0 {
            return Err(Error::BudgetExhausted);
        }
        if i >= self.len() {
            return Err(Error::invalid(format!("pool index {i} out of range")));
        }
        if self.is_queried[i] {
            return Err(Error::invalid(format!("pool index {i} already queried")));
        }
        self.is_queried[i] = true;
        self.queried.push(i);
        Ok(match &self.data.targets {
            Targets::Real(y) => y[i],
            Targets::Binary(y) => f64::from(u8::from(y[i])),
            Targets::Pairs(_) => unreachable!("rejected at construction"),
        })
    }

    /// The revealed examples, in query order.
    pub fn revealed(&self) -> Dataset {
        self.data.select(&self.queried)
    }
}

fn criterion_scores(criterion: QueryCriterion, outputs: &Matrix, weights: &[f64]) -> Result<Option<Vec<f64>>> {
    Ok(match criterion {
        QueryCriterion::Entropy => Some(entropy_scores(&probabilities(outputs), weights)?),
        QueryCriterion::Bald => Some(bald_scores(&probabilities(outputs), weights)?),
        QueryCriterion::Variance => Some(variance_scores(outputs, weights)?),
        QueryCriterion::Random { .. } => None,
    })
}

/// Picks the next query given precomputed `K × N` head outputs over the pool.
///
/// Returns the pool index and its criterion score (`None` for random selection).
/// Ties go to the lowest index; random selection draws uniformly from the unqueried
/// inputs with a stream derived from its seed and the number of queries so far.
pub fn select_from_outputs(
    pool: &Pool,
    criterion: QueryCriterion,
    outputs: &Matrix,
    weights: &[f64],
) -> Result<(usize, Option<f64>)> {
    criterion.check(pool.kind())?;
    if pool.remaining_budget() == 0 || pool.queried.len() == pool.len() {
        return Err(Error::BudgetExhausted);
    }
    if outputs.cols() != pool.len() {
        return Err(Error::invalid("outputs do not cover the pool"));
    }
    match criterion_scores(criterion, outputs, weights)? {
        None => {
            let QueryCriterion::Random { seed } = criterion else {
                unreachable!()
            };
            let mut r = rng::seeded(rng::sub_seed(seed, pool.queried.len() as u64));
            let open: Vec<usize> = (0..pool.len()).filter(|&i| !pool.is_queried[i]).collect();
            Ok((open[r.random_range(0..open.len())], None))
        }
        Some(scores) => {
            let mut best: Option<usize> = None;
            for (i, &s) in scores.iter().enumerate() {
                if pool.is_queried[i] {
                    continue;
                }
                match best {
                    Some(b) if scores[b] >= s => {}
                    _ => best = Some(i),
                }
            }
            let i = best.expect("an unqueried input exists");
            Ok((i, Some(scores[i])))
        }
    }
}

pub fn select_query(
    pool: &Pool,
    criterion: QueryCriterion,
    model: &EnsembleModel,
    belief: &BeliefState,
) -> Result<usize> {
    let outputs = model.forward(pool.inputs())?;
    Ok(select_from_outputs(pool, criterion, &outputs, &belief.weights())?.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub iteration: usize,
    pub pool_index: usize,
    pub score: Option<f64>,
    pub label: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct QueryLog {
    pub records: Vec<QueryRecord>,
}

impl QueryLog {
    pub fn indices(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.pool_index).collect()
    }

    /// CSV with header `iteration,pool_index,score,label`; random queries leave `score` empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r).map_err(|e| Error::format(e.to_string()))?;
        }
        if self.records.is_empty() {
            w.write_record(["iteration", "pool_index", "score", "label"])
                .map_err(|e| Error::format(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(f)
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let records = r
            .deserialize()
            .collect::<std::result::Result<Vec<QueryRecord>, _>>()
            .map_err(|e| Error::format(e.to_string()))?;
        Ok(Self { records })
    }
}

#[derive(Clone, Debug)]
pub struct Adaptation {
    pub belief: BeliefState,
    pub log: QueryLog,
}

/// Runs `budget` rounds of select → reveal → reweight starting from a uniform belief.
pub fn run_adaptation(
    model: &EnsembleModel,
    pool: &mut Pool,
    budget: usize,
    criterion: QueryCriterion,
    loss: PointLoss,
) -> Result<Adaptation> {
    let outputs = model.forward(pool.inputs())?;
    adapt_on_outputs(&outputs, pool, budget, criterion, loss, BeliefState::uniform(model.heads())?)
}

/// The adaptation loop over precomputed `K × N` pool outputs.
///
/// Every round re-scores each head on the full revealed set before recomputing weights.
/// The initial belief's temperature and log prior are kept.
pub fn adapt_on_outputs(
    outputs: &Matrix,
    pool: &mut Pool,
    budget: usize,
    criterion: QueryCriterion,
    loss: PointLoss,
    initial: BeliefState,
) -> Result<Adaptation> {
    if budget > pool.len() {
        return Err(Error::invalid(format!(
            "budget {budget} exceeds pool size {}",
            pool.len()
        )));
    }
    if budget > pool.remaining_budget() {
        return Err(Error::BudgetExhausted);
    }
    if outputs.rows() != initial.k() {
        return Err(Error::invalid("initial belief does not match head count"));
    }
    let baseline = initial.clone();
    let mut belief = initial;
    let mut log = QueryLog::default();
    for iteration in 0..budget {
        let weights = belief.weights();
        let (idx, score) = select_from_outputs(pool, criterion, outputs, &weights)?;
        let label = pool.reveal(idx)?;
        log.records.push(QueryRecord {
            iteration,
            pool_index: idx,
            score,
            label,
        });
        let revealed = pool.revealed();
        let revealed_outputs = outputs.transpose().select_rows(pool.queried()).transpose();
        let totals = cumulative_head_losses(&revealed_outputs, &revealed, loss)?;
        belief = baseline.clone();
        belief.accumulate(&totals)?;
    }
    Ok(Adaptation { belief, log })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regression_pool(n: usize, budget: usize) -> Pool {
        let x = Matrix::from_fn(n, 1, |r, _| r as f64);
        Pool::new(Dataset::regression(x, vec![0.0; n]).unwrap(), budget).unwrap()
    }

    #[test]
    fn forced_choice_and_tie_break() {
        let mut pool = regression_pool(3, 3);
        let outputs = Matrix::from_rows(&[vec![0.0, 1.0, 1.0], vec![0.0, -1.0, -1.0]]).unwrap();
        let (i, s) = select_from_outputs(&pool, QueryCriterion::Variance, &outputs, &[0.5, 0.5]).unwrap();
        assert_eq!((i, s), (1, Some(1.0)));
        pool.reveal(1).unwrap();
        pool.reveal(2).unwrap();
        for c in [QueryCriterion::Variance, QueryCriterion::Random { seed: 9 }] {
            assert_eq!(select_from_outputs(&pool, c, &outputs, &[0.5, 0.5]).unwrap().0, 0);
        }
        pool.reveal(0).unwrap();
        assert!(matches!(
            select_from_outputs(&pool, QueryCriterion::Variance, &outputs, &[0.5, 0.5]),
            Err(Error::BudgetExhausted)
        ));
    }

    #[test]
    fn criterion_must_fit_task() {
        let pool = regression_pool(2, 1);
        let outputs = Matrix::zeros(1, 2);
        assert!(select_from_outputs(&pool, QueryCriterion::Bald, &outputs, &[1.0]).is_err());
    }

    #[test]
    fn pool_rejects_oversized_budget_and_repeats() {
        let x = Matrix::zeros(2, 1);
        assert!(Pool::new(Dataset::regression(x, vec![0.0; 2]).unwrap(), 3).is_err());
        let mut pool = regression_pool(2, 1);
        pool.reveal(0).unwrap();
        assert!(matches!(pool.reveal(1), Err(Error::BudgetExhausted)));
    }

    #[test]
    fn criterion_names() {
        assert_eq!(QueryCriterion::parse("bald").unwrap(), QueryCriterion::Bald);
        assert_eq!(
            QueryCriterion::parse("random:5").unwrap(),
            QueryCriterion::Random { seed: 5 }
        );
        assert!(QueryCriterion::parse("best").is_err());
    }

    #[test]
    fn log_csv_round_trip() {
        let log = QueryLog {
            records: vec![
                QueryRecord { iteration: 0, pool_index: 4, score: Some(0.25), label: 1.0 },
                QueryRecord { iteration: 1, pool_index: 2, score: None, label: -0.5 },
            ],
        };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("iteration,pool_index,score,label\n"));
        assert_eq!(QueryLog::read_csv(buf.as_slice()).unwrap(), log);
    }
}
