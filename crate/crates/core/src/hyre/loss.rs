use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::tasks::{Dataset, TaskKind, Targets};

/// What happens when a prediction sits exactly on the decision boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    #[default]
    CountAsError,
    CountAsCorrect,
}

/// Per-point adaptation loss `l(f_k, x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointLoss {
    /// Logit thresholded at 0 against a binary label.
    ZeroOne(TiePolicy),
    SquaredError,
    /// 0 iff the chosen item scores strictly higher (ties follow the policy).
    PreferenceError(TiePolicy),
}

impl PointLoss {
    pub fn zero_one() -> Self {
        PointLoss::ZeroOne(TiePolicy::default())
    }

    pub fn preference() -> Self {
        PointLoss::PreferenceError(TiePolicy::default())
    }

    pub fn for_task(kind: TaskKind) -> Self {
        match kind {
            TaskKind::Regression => PointLoss::SquaredError,
            TaskKind::Binary => Self::zero_one(),
            TaskKind::Preference => Self::preference(),
        }
    }

    pub fn task(self) -> TaskKind {
        match self {
            PointLoss::ZeroOne(_) => TaskKind::Binary,
            PointLoss::SquaredError => TaskKind::Regression,
            PointLoss::PreferenceError(_) => TaskKind::Preference,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Prediction {
    Scalar(f64),
    /// Scores of the chosen and rejected item.
    Pair { chosen: f64, rejected: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Outcome {
    Real(f64),
    Label(bool),
    /// The first item of the pair was preferred.
    Preferred,
}

fn tie_loss(policy: TiePolicy) -> f64 {
    match policy {
        TiePolicy::CountAsError => 1.0,
        TiePolicy::CountAsCorrect => 0.0,
    }
}

pub fn point_loss(kind: PointLoss, prediction: Prediction, target: Outcome) -> Result<f64> {
    let value = match (kind, prediction, target) {
        (PointLoss::ZeroOne(policy), Prediction::Scalar(logit), Outcome::Label(label)) => {
            if logit == 0.0 {
                tie_loss(policy)
            } else if (logit > 0.0) == label {
                0.0
            } else {
                1.0
            }
        }
        (PointLoss::SquaredError, Prediction::Scalar(p), Outcome::Real(y)) => (p - y).powi(2),
        (PointLoss::PreferenceError(policy), Prediction::Pair { chosen, rejected }, Outcome::Preferred) => {
            if chosen == rejected {
                tie_loss(policy)
            } else if chosen > rejected {
                0.0
            } else {
                1.0
            }
        }
        (kind, prediction, target) => {
            return Err(Error::invalid(format!(
                "loss {kind:?} cannot score {prediction:?} against {target:?}"
            )))
        }
    };
    if !value.is_finite() {
        return Err(Error::numeric("non-finite point loss"));
    }
    Ok(value)
}

/// Loss of every head on every example: a `K × n_examples` matrix.
///
/// `outputs` holds head outputs over the rows of `data.x`.
pub fn per_point_losses(outputs: &Matrix, data: &Dataset, kind: PointLoss) -> Result<Matrix> {
    if outputs.cols() != data.x.rows() {
        return Err(Error::invalid("outputs do not cover the dataset rows"));
    }
    if kind.task() != data.kind() {
        return Err(Error::invalid(format!(
            "loss {kind:?} incompatible with {:?} data",
            data.kind()
        )));
    }
    let k = outputs.rows();
    let mut out = Matrix::zeros(k, data.len());
    for h in 0..k {
        let row = outputs.row(h);
        for i in 0..data.len() {
            let (pred, target) = match &data.targets {
                Targets::Real(y) => (Prediction::Scalar(row[i]), Outcome::Real(y[i])),
                Targets::Binary(y) => (Prediction::Scalar(row[i]), Outcome::Label(y[i])),
                Targets::Pairs(p) => (
                    Prediction::Pair {
                        chosen: row[p[i].0],
                        rejected: row[p[i].1],
                    },
                    Outcome::Preferred,
                ),
            };
            out.set(h, i, point_loss(kind, pred, target)?);
        }
    }
    Ok(out)
}

/// Cumulative loss of each head over the whole dataset.
pub fn cumulative_head_losses(outputs: &Matrix, data: &Dataset, kind: PointLoss) -> Result<Vec<f64>> {
    let per = per_point_losses(outputs, data, kind)?;
    Ok((0..per.rows()).map(|h| per.row(h).iter().sum()).collect())
}
