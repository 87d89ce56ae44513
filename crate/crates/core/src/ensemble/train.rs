use rand::seq::index::sample;

use super::config::{LossKind, TrainConfig};
use super::model::EnsembleModel;
use crate::error::{Error, Result};
use crate::nn::{Matrix, OptimizerState};
use crate::rng;
use crate::tasks::{Dataset, Targets};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// A minibatch laid out for one forward pass.
struct Batch {
    inputs: Matrix,
    targets: BatchTargets,
}

enum BatchTargets {
    Real(Vec<f64>),
    Binary(Vec<bool>),
    /// Inputs hold `m` chosen rows followed by `m` rejected rows.
    Pairs(usize),
}

fn make_batch(data: &Dataset, idx: &[usize]) -> Result<Batch> {
    Ok(match &data.targets {
        Targets::Real(y) => Batch {
            inputs: data.x.select_rows(idx),
            targets: BatchTargets::Real(idx.iter().map(|&i| y[i]).collect()),
        },
        Targets::Binary(y) => Batch {
            inputs: data.x.select_rows(idx),
            targets: BatchTargets::Binary(idx.iter().map(|&i| y[i]).collect()),
        },
        Targets::Pairs(p) => {
            let rows: Vec<usize> = idx
                .iter()
                .map(|&i| p[i].0)
                .chain(idx.iter().map(|&i| p[i].1))
                .collect();
            Batch {
                inputs: data.x.select_rows(&rows),
                targets: BatchTargets::Pairs(idx.len()),
            }
        }
    })
}

/// Per-head mean loss and its gradient with respect to the `K × M` outputs.
fn loss_and_grad(outputs: &Matrix, targets: &BatchTargets) -> (Vec<f64>, Matrix) {
    let (k_heads, m) = outputs.shape();
    let mut grad = Matrix::zeros(k_heads, m);
    let mut losses = vec![0.0; k_heads];
    match targets {
        BatchTargets::Real(y) => {
            let scale = 1.0 / m as f64;
            for k in 0..k_heads {
                for (i, &yi) in y.iter().enumerate() {
                    let r = outputs.get(k, i) - yi;
                    losses[k] += r * r * scale;
                    grad.set(k, i, 2.0 * r * scale);
                }
            }
        }
        BatchTargets::Binary(y) => {
            let scale = 1.0 / m as f64;
            for k in 0..k_heads {
                for (i, &yi) in y.iter().enumerate() {
                    let f = outputs.get(k, i);
                    let t = if yi { 1.0 } else { 0.0 };
                    losses[k] += (softplus(f) - t * f) * scale;
                    grad.set(k, i, (sigmoid(f) - t) * scale);
                }
            }
        }
        BatchTargets::Pairs(pairs) => {
            let b = *pairs;
            let scale = 1.0 / b as f64;
            for k in 0..k_heads {
                for i in 0..b {
                    let margin = outputs.get(k, i) - outputs.get(k, b + i);
                    losses[k] += softplus(-margin) * scale;
                    let g = -sigmoid(-margin) * scale;
                    grad.set(k, i, g);
                    grad.set(k, b + i, -g);
                }
            }
        }
    }
    (losses, grad)
}

fn check_compat(data: &Dataset, loss: LossKind) -> Result<()> {
    if data.kind() != loss.task() {
        return Err(Error::invalid(format!(
            "loss {loss:?} is incompatible with {:?} data",
            data.kind()
        )));
    }
    Ok(())
}

impl EnsembleModel {
    /// Minimizes the sum of per-head losses over `data` by minibatch gradient steps on
    /// the learnable components. Returns the mean per-head loss of every step.
    pub fn train(&mut self, data: &Dataset, tc: &TrainConfig) -> Result<Vec<f64>> {
        check_compat(data, tc.loss)?;
        if tc.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if tc.steps == 0 {
            return Ok(Vec::new());
        }
        if data.is_empty() {
            return Err(Error::invalid("cannot train on an empty dataset"));
        }
        let mut optimizers: Vec<OptimizerState> = self
            .learnable_mut()
            .into_iter()
            .map(|p| OptimizerState::new(tc.optimizer, p))
            .collect();
        let mut r = rng::seeded(tc.seed);
        let n = data.len();
        let bs = tc.batch_size.min(n);
        let mut history = Vec::with_capacity(tc.steps);
        for step in 0..tc.steps {
            let idx = sample(&mut r, n, bs).into_vec();
            let batch = make_batch(data, &idx)?;
            let (outputs, cache) = self.forward_cached(&batch.inputs)?;
            let (losses, grad) = loss_and_grad(&outputs, &batch.targets);
            let mean = losses.iter().sum::<f64>() / losses.len() as f64;
            if !mean.is_finite() {
                return Err(Error::numeric(format!("non-finite training loss at step {step}")));
            }
            history.push(mean);
            let grads = self.backward_cached(&cache, &grad)?;
            for ((p, g), opt) in self.learnable_mut().into_iter().zip(&grads).zip(&mut optimizers) {
                opt.step(p, g)
                    .map_err(|e| Error::numeric(format!("step {step}: {e}")))?;
            }
        }
        Ok(history)
    }

    /// Full-data training loss of each head.
    pub fn head_train_losses(&self, data: &Dataset, loss: LossKind) -> Result<Vec<f64>> {
        check_compat(data, loss)?;
        let idx: Vec<usize> = (0..data.len()).collect();
        let batch = make_batch(data, &idx)?;
        let outputs = self.forward(&batch.inputs)?;
        Ok(loss_and_grad(&outputs, &batch.targets).0)
    }
}
