use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, OptimizerConfig};
use crate::tasks::TaskKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// K independently initialized networks, no shared parameters.
    Vanilla,
    /// One network emitting K outputs plus a frozen prior network of the same shape.
    #[default]
    SharedBase,
    /// Base network plus an index-conditioned epistemic network evaluated at K fixed indices.
    Epinet,
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(Self::Vanilla),
            "shared_base" => Ok(Self::SharedBase),
            "epinet" => Ok(Self::Epinet),
            other => Err(Error::invalid(format!("unknown architecture `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub heads: usize,
    pub architecture: Architecture,
    pub input_dim: usize,
    /// Hidden widths shared by every component network.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Scale `v` applied to frozen prior outputs.
    pub prior_scale: f64,
    /// Epistemic index dimension (epinet only).
    pub index_dim: usize,
    pub seed: u64,
}

impl EnsembleConfig {
    pub fn new(architecture: Architecture, heads: usize, input_dim: usize) -> Self {
        Self {
            heads,
            architecture,
            input_dim,
            hidden: vec![128],
            activation: Activation::Relu,
            prior_scale: 1.0,
            index_dim: 10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 {
            return Err(Error::invalid("ensemble needs at least one head"));
        }
        if self.input_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        if !(self.prior_scale >= 0.0 && self.prior_scale.is_finite()) {
            return Err(Error::invalid(format!(
                "prior scale must be finite and non-negative, got {}",
                self.prior_scale
            )));
        }
        if self.architecture == Architecture::Epinet && self.index_dim == 0 {
            return Err(Error::invalid("epinet index dimension must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    BinaryCrossEntropy,
    /// `-log σ(s_chosen - s_rejected)` over preference pairs.
    BradleyTerry,
}

impl LossKind {
    pub fn for_task(kind: TaskKind) -> Self {
        match kind {
            TaskKind::Regression => LossKind::Mse,
            TaskKind::Binary => LossKind::BinaryCrossEntropy,
            TaskKind::Preference => LossKind::BradleyTerry,
        }
    }

    pub fn task(self) -> TaskKind {
        match self {
            LossKind::Mse => TaskKind::Regression,
            LossKind::BinaryCrossEntropy => TaskKind::Binary,
            LossKind::BradleyTerry => TaskKind::Preference,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub loss: LossKind,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(loss: LossKind, steps: usize) -> Self {
        Self {
            steps,
            batch_size: 64,
            optimizer: OptimizerConfig::default(),
            loss,
            seed: 0,
        }
    }
}
