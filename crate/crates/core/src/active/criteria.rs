//! Acquisition scores. Classification criteria consume per-head probabilities,
//! the variance criterion consumes raw regression outputs.

use crate::ensemble::{sigmoid, EnsembleModel};
use crate::error::{Error, Result};
use crate::hyre::BeliefState;
use crate::nn::Matrix;

/// Natural-log binary entropy with `0 · ln 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.ln() };
    term(p) + term(1.0 - p)
}

fn check_weights(k: usize, weights: &[f64]) -> Result<()> {
    if weights.len() != k {
        return Err(Error::invalid(format!("{} weights for {k} heads", weights.len())));
    }
    Ok(())
}

fn check_probs(probs: &Matrix) -> Result<()> {
    if let Some(p) = probs.data().iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::numeric(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

fn mixture(probs: &Matrix, weights: &[f64], n: usize) -> f64 {
    weights
        .iter()
        .enumerate()
        .map(|(k, w)| w * probs.get(k, n))
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// `H(Σ_k w_k p_k(x))` per input. `probs` is `K × N`.
pub fn entropy_scores(probs: &Matrix, weights: &[f64]) -> Result<Vec<f64>> {
    check_weights(probs.rows(), weights)?;
    check_probs(probs)?;
    Ok((0..probs.cols())
        .map(|n| binary_entropy(mixture(probs, weights, n)))
        .collect())
}

/// `H(Σ_k w_k p_k(x)) − Σ_k w_k H(p_k(x))` per input.
pub fn bald_scores(probs: &Matrix, weights: &[f64]) -> Result<Vec<f64>> {
    check_weights(probs.rows(), weights)?;
    check_probs(probs)?;
    Ok((0..probs.cols())
        .map(|n| {
            let member: f64 = weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * binary_entropy(probs.get(k, n)))
                .sum();
            binary_entropy(mixture(probs, weights, n)) - member
        })
        .collect())
}

/// `Σ_k w_k (f_k(x) − f̄(x))²` with `f̄` the weighted mean.
pub fn variance_scores(outputs: &Matrix, weights: &[f64]) -> Result<Vec<f64>> {
    check_weights(outputs.rows(), weights)?;
    Ok((0..outputs.cols())
        .map(|n| {
            let mean: f64 = weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * outputs.get(k, n))
                .sum();
            weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * (outputs.get(k, n) - mean).powi(2))
                .sum()
        })
        .collect())
}

pub(crate) fn probabilities(logits: &Matrix) -> Matrix {
    logits.map(sigmoid)
}

pub fn score_entropy(model: &EnsembleModel, belief: &BeliefState, inputs: &Matrix) -> Result<Vec<f64>> {
    entropy_scores(&probabilities(&model.forward(inputs)?), &belief.weights())
}

pub fn score_bald(model: &EnsembleModel, belief: &BeliefState, inputs: &Matrix) -> Result<Vec<f64>> {
    bald_scores(&probabilities(&model.forward(inputs)?), &belief.weights())
}

pub fn score_variance(model: &EnsembleModel, belief: &BeliefState, inputs: &Matrix) -> Result<Vec<f64>> {
    variance_scores(&model.forward(inputs)?, &belief.weights())
}
