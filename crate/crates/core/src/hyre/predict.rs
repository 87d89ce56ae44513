use serde::{Deserialize, Serialize};

use super::belief::BeliefState;
use super::loss::{cumulative_head_losses, PointLoss};
use crate::ensemble::{sigmoid, EnsembleModel};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::tasks::Dataset;

/// How head outputs are mixed into one prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    /// Mix raw outputs (regression values, or logits for a logit ensemble).
    Raw,
    /// Mix `σ(logit)`; the result is a probability.
    #[default]
    Probabilities,
}

/// `Σ_k w_k g(outputs[k, n])` for every column `n`.
pub fn weighted_combine(outputs: &Matrix, weights: &[f64], combine: Combine) -> Result<Vec<f64>> {
    if outputs.rows() != weights.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} heads",
            weights.len(),
            outputs.rows()
        )));
    }
    let mut out = vec![0.0; outputs.cols()];
    for (k, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (o, &v) in out.iter_mut().zip(outputs.row(k)) {
            *o += w
                * match combine {
                    Combine::Raw => v,
                    Combine::Probabilities => sigmoid(v),
                };
        }
    }
    Ok(out)
}

/// Belief-weighted ensemble prediction over the rows of `inputs`.
pub fn weighted_predict(
    model: &EnsembleModel,
    belief: &BeliefState,
    inputs: &Matrix,
    combine: Combine,
) -> Result<Vec<f64>> {
    if belief.k() != model.heads() {
        return Err(Error::invalid(format!(
            "belief covers {} heads, model has {}",
            belief.k(),
            model.heads()
        )));
    }
    weighted_combine(&model.forward(inputs)?, &belief.weights(), combine)
}

/// Index of the lowest cumulative loss; ties go to the lowest index.
pub fn argmin_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] <= v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// The single head with the lowest cumulative loss on labeled data.
pub fn best_head(model: &EnsembleModel, labeled: &Dataset, loss: PointLoss) -> Result<usize> {
    if labeled.is_empty() {
        return Err(Error::invalid("best_head needs a non-empty labeled set"));
    }
    let outputs = model.forward(&labeled.x)?;
    best_head_from_outputs(&outputs, labeled, loss)
}

pub fn best_head_from_outputs(outputs: &Matrix, labeled: &Dataset, loss: PointLoss) -> Result<usize> {
    if labeled.is_empty() {
        return Err(Error::invalid("best_head needs a non-empty labeled set"));
    }
    let losses = cumulative_head_losses(outputs, labeled, loss)?;
    argmin_first(&losses).ok_or_else(|| Error::invalid("no heads"))
}
