use serde::{Deserialize, Serialize};

use super::mlp::MlpParams;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled weight decay, applied as `p -= lr * wd * p`.
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
            ..Self::default()
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Optimizer state for one parameter set.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    step: u64,
    moments: Option<(MlpParams, MlpParams)>,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, params: &MlpParams) -> Self {
        let moments = match config.kind {
            OptimizerKind::Sgd => None,
            OptimizerKind::Adam => Some((params.zeros_like(), params.zeros_like())),
        };
        Self {
            config,
            step: 0,
            moments,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update to `params` in place.
    pub fn step(&mut self, params: &mut MlpParams, grads: &MlpParams) -> Result<()> {
        if !params.same_shape(grads) {
            return Err(Error::invalid("gradient shapes do not match parameters"));
        }
        if let Some((m, _)) = &self.moments {
            if !m.same_shape(params) {
                return Err(Error::invalid("optimizer state shapes do not match parameters"));
            }
        }
        if grads.values().any(|g| !g.is_finite()) {
            return Err(Error::numeric(format!(
                "non-finite gradient at optimizer step {}",
                self.step
            )));
        }
        self.step += 1;
        let c = self.config;
        let decay = 1.0 - c.learning_rate * c.weight_decay;
        match &mut self.moments {
            None => {
                for (p, &g) in params.values_mut().zip(grads.values()) {
                    *p = *p * decay - c.learning_rate * g;
                }
            }
            Some((m, v)) => {
                let t = self.step as i32;
                let bc1 = 1.0 - c.beta1.powi(t);
                let bc2 = 1.0 - c.beta2.powi(t);
                for (((p, &g), mi), vi) in params
                    .values_mut()
                    .zip(grads.values())
                    .zip(m.values_mut())
                    .zip(v.values_mut())
                {
                    *mi = c.beta1 * *mi + (1.0 - c.beta1) * g;
                    *vi = c.beta2 * *vi + (1.0 - c.beta2) * g * g;
                    let m_hat = *mi / bc1;
                    let v_hat = *vi / bc2;
                    *p = *p * decay - c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
                }
            }
        }
        Ok(())
    }
}
