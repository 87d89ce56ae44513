//! The three ensemble parameterizations and their forward passes.
//!
//! Every variant maps an `N × D` input batch to a `K × N` matrix of scalar head
//! outputs (regression values or logits):
//!
//! - vanilla: row `k` is member `k`'s output;
//! - shared-base: `v · prior(x)[k] + learnable(x)[k]`;
//! - epinet: `base(x) + v · frozen(x)·z_k + trainable(z_k, φ(x), x)·z_k`, with
//!   `φ` the base network's last hidden layer and `z_k` drawn once at build time.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::{Architecture, EnsembleConfig};
use crate::error::{Error, Result};
use crate::nn::{dot, init_params, ForwardTrace, InitScheme, Matrix, MlpParams};
use crate::rng;

// Seed streams.
const PRIOR_STREAM: u64 = 1;
const LEARNABLE_STREAM: u64 = 2;
const INDEX_STREAM: u64 = 3;
const MEMBER_STREAM: u64 = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Body {
    Vanilla {
        members: Vec<MlpParams>,
    },
    SharedBase {
        /// Frozen; `D → hidden → K`.
        prior: MlpParams,
        /// `D → hidden → K`.
        learnable: MlpParams,
    },
    Epinet {
        /// `D → hidden → 1`.
        base: MlpParams,
        /// Frozen; `D → hidden → d`.
        epi_frozen: MlpParams,
        /// `(d + h + D) → hidden → d`.
        epi_trainable: MlpParams,
        /// `K × d` fixed epistemic indices.
        indices: Matrix,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub config: EnsembleConfig,
    pub body: Body,
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = Vec::with_capacity(hidden.len() + 2);
    s.push(input);
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

/// Builds an ensemble. Frozen parts come from `config.seed`, learnable parts from
/// derived sub-seeds.
pub fn build_ensemble(config: &EnsembleConfig) -> Result<EnsembleModel> {
    config.validate()?;
    let c = config;
    let init = |layers: &[usize], stream: u64| {
        init_params(
            layers,
            c.activation,
            rng::sub_seed(c.seed, stream),
            InitScheme::FanInUniform,
        )
    };
    let body = match c.architecture {
        Architecture::Vanilla => Body::Vanilla {
            members: (0..c.heads)
                .map(|k| init(&sizes(c.input_dim, &c.hidden, 1), MEMBER_STREAM + k as u64))
                .collect::<Result<_>>()?,
        },
        Architecture::SharedBase => {
            let layers = sizes(c.input_dim, &c.hidden, c.heads);
            Body::SharedBase {
                prior: init(&layers, PRIOR_STREAM)?,
                learnable: init(&layers, LEARNABLE_STREAM)?,
            }
        }
        Architecture::Epinet => {
            let base = init(&sizes(c.input_dim, &c.hidden, 1), LEARNABLE_STREAM)?;
            let feat = base.last_hidden_dim();
            let epi_frozen = init(&sizes(c.input_dim, &c.hidden, c.index_dim), PRIOR_STREAM)?;
            let epi_trainable = init(
                &sizes(c.index_dim + feat + c.input_dim, &c.hidden, c.index_dim),
                LEARNABLE_STREAM + 1,
            )?;
            let mut r = rng::seeded(rng::sub_seed(c.seed, INDEX_STREAM));
            let indices = Matrix::from_fn(c.heads, c.index_dim, |_, _| StandardNormal.sample(&mut r));
            Body::Epinet {
                base,
                epi_frozen,
                epi_trainable,
                indices,
            }
        }
    };
    Ok(EnsembleModel {
        config: config.clone(),
        body,
    })
}

/// Intermediates of a training forward pass.
pub(crate) enum Cache {
    Vanilla(Vec<ForwardTrace>),
    SharedBase(ForwardTrace),
    Epinet {
        base: ForwardTrace,
        trainable: ForwardTrace,
    },
}

impl EnsembleModel {
    pub fn heads(&self) -> usize {
        self.config.heads
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    fn check_inputs(&self, inputs: &Matrix) -> Result<()> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "ensemble expects {} input features, got {}",
                self.input_dim(),
                inputs.cols()
            )));
        }
        Ok(())
    }

    /// `K × N` head outputs.
    pub fn forward(&self, inputs: &Matrix) -> Result<Matrix> {
        self.check_inputs(inputs)?;
        let v = self.config.prior_scale;
        match &self.body {
            Body::Vanilla { members } => {
                let n = inputs.rows();
                let mut out = Matrix::zeros(members.len(), n);
                for (k, m) in members.iter().enumerate() {
                    out.row_mut(k).copy_from_slice(m.forward(inputs)?.data());
                }
                Ok(out)
            }
            Body::SharedBase { prior, learnable } => {
                let p = prior.forward(inputs)?;
                let l = learnable.forward(inputs)?;
                Ok(Matrix::from_fn(self.heads(), inputs.rows(), |k, n| {
                    v * p.get(n, k) + l.get(n, k)
                }))
            }
            Body::Epinet { .. } => Ok(self.forward_cached(inputs)?.0),
        }
    }

    /// Epinet output at an arbitrary index `z`; one value per input row.
    pub fn epinet_forward(&self, z: &[f64], inputs: &Matrix) -> Result<Vec<f64>> {
        self.check_inputs(inputs)?;
        let Body::Epinet {
            base,
            epi_frozen,
            epi_trainable,
            ..
        } = &self.body
        else {
            return Err(Error::invalid("epinet_forward on a non-epinet ensemble"));
        };
        if z.len() != self.config.index_dim {
            return Err(Error::invalid(format!(
                "index has length {}, expected {}",
                z.len(),
                self.config.index_dim
            )));
        }
        let trace = base.forward_trace(inputs)?;
        let frozen = epi_frozen.forward(inputs)?;
        let zmat = Matrix::from_fn(inputs.rows(), z.len(), |_, j| z[j]);
        let stacked = Matrix::hstack(&[&zmat, trace.last_hidden(), inputs])?;
        let trainable = epi_trainable.forward(&stacked)?;
        let v = self.config.prior_scale;
        Ok((0..inputs.rows())
            .map(|n| {
                trace.output().get(n, 0) + v * dot(frozen.row(n), z) + dot(trainable.row(n), z)
            })
            .collect())
    }

    /// The frozen-prior term `frozen(x)·z` of the epinet, without the scale.
    pub fn epinet_prior_term(&self, z: &[f64], inputs: &Matrix) -> Result<Vec<f64>> {
        let Body::Epinet { epi_frozen, .. } = &self.body else {
            return Err(Error::invalid("not an epinet ensemble"));
        };
        let frozen = epi_frozen.forward(inputs)?;
        Ok((0..inputs.rows()).map(|n| dot(frozen.row(n), z)).collect())
    }

    /// Per-input population variance of the head outputs.
    pub fn disagreement(&self, inputs: &Matrix) -> Result<Vec<f64>> {
        Ok(head_variance(&self.forward(inputs)?))
    }

    /// Little-endian bytes of every frozen parameter (and the epinet indices).
    pub fn frozen_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut push = |vals: &mut dyn Iterator<Item = &f64>| {
            for v in vals {
                out.extend_from_slice(&v.to_le_bytes());
            }
        };
        match &self.body {
            Body::Vanilla { .. } => {}
            Body::SharedBase { prior, .. } => push(&mut prior.values()),
            Body::Epinet {
                epi_frozen, indices, ..
            } => {
                push(&mut epi_frozen.values());
                push(&mut indices.data().iter());
            }
        }
        out
    }

    /// Named parameter blocks with their frozen flag.
    pub fn blocks(&self) -> Vec<(String, bool, &MlpParams)> {
        match &self.body {
            Body::Vanilla { members } => members
                .iter()
                .enumerate()
                .map(|(k, m)| (format!("member{k}"), false, m))
                .collect(),
            Body::SharedBase { prior, learnable } => vec![
                ("prior".into(), true, prior),
                ("learnable".into(), false, learnable),
            ],
            Body::Epinet {
                base,
                epi_frozen,
                epi_trainable,
                ..
            } => vec![
                ("base".into(), false, base),
                ("epi_frozen".into(), true, epi_frozen),
                ("epi_trainable".into(), false, epi_trainable),
            ],
        }
    }

    /// Learnable blocks in the order used by [`Self::learnable_gradients`].
    pub fn learnable(&self) -> Vec<&MlpParams> {
        match &self.body {
            Body::Vanilla { members } => members.iter().collect(),
            Body::SharedBase { learnable, .. } => vec![learnable],
            Body::Epinet {
                base,
                epi_trainable,
                ..
            } => vec![base, epi_trainable],
        }
    }

    /// Gradients of `Σ upstream ⊙ forward(inputs)` for each learnable block, where
    /// `upstream` is `K × N`. For the epinet the features `φ(x)` feeding the epistemic
    /// network are held constant, so base hidden layers only receive the base-output path.
    pub fn learnable_gradients(&self, inputs: &Matrix, upstream: &Matrix) -> Result<Vec<MlpParams>> {
        if upstream.shape() != (self.heads(), inputs.rows()) {
            return Err(Error::invalid("upstream gradient must be K x N"));
        }
        let (_, cache) = self.forward_cached(inputs)?;
        self.backward_cached(&cache, upstream)
    }

    pub fn learnable_mut(&mut self) -> Vec<&mut MlpParams> {
        match &mut self.body {
            Body::Vanilla { members } => members.iter_mut().collect(),
            Body::SharedBase { learnable, .. } => vec![learnable],
            Body::Epinet {
                base,
                epi_trainable,
                ..
            } => vec![base, epi_trainable],
        }
    }

    pub(crate) fn forward_cached(&self, inputs: &Matrix) -> Result<(Matrix, Cache)> {
        self.check_inputs(inputs)?;
        let n = inputs.rows();
        let k_heads = self.heads();
        let v = self.config.prior_scale;
        match &self.body {
            Body::Vanilla { members } => {
                let mut out = Matrix::zeros(k_heads, n);
                let mut traces = Vec::with_capacity(members.len());
                for (k, m) in members.iter().enumerate() {
                    let t = m.forward_trace(inputs)?;
                    out.row_mut(k).copy_from_slice(t.output().data());
                    traces.push(t);
                }
                Ok((out, Cache::Vanilla(traces)))
            }
            Body::SharedBase { prior, learnable } => {
                let p = prior.forward(inputs)?;
                let t = learnable.forward_trace(inputs)?;
                let l = t.output();
                let out = Matrix::from_fn(k_heads, n, |k, i| v * p.get(i, k) + l.get(i, k));
                Ok((out, Cache::SharedBase(t)))
            }
            Body::Epinet {
                base,
                epi_frozen,
                epi_trainable,
                indices,
            } => {
                let d = indices.cols();
                let bt = base.forward_trace(inputs)?;
                let frozen = epi_frozen.forward(inputs)?;
                let phi = bt.last_hidden();
                let width = d + phi.cols() + inputs.cols();
                let mut stacked = Matrix::zeros(k_heads * n, width);
                for k in 0..k_heads {
                    let z = indices.row(k);
                    for i in 0..n {
                        let row = stacked.row_mut(k * n + i);
                        row[..d].copy_from_slice(z);
                        row[d..d + phi.cols()].copy_from_slice(phi.row(i));
                        row[d + phi.cols()..].copy_from_slice(inputs.row(i));
                    }
                }
                let tt = epi_trainable.forward_trace(&stacked)?;
                let tr = tt.output();
                let out = Matrix::from_fn(k_heads, n, |k, i| {
                    let z = indices.row(k);
                    bt.output().get(i, 0) + v * dot(frozen.row(i), z) + dot(tr.row(k * n + i), z)
                });
                Ok((
                    out,
                    Cache::Epinet {
                        base: bt,
                        trainable: tt,
                    },
                ))
            }
        }
    }

    /// Gradients for [`Self::learnable_mut`] given `∂loss/∂outputs` (`K × N`).
    ///
    /// The epinet features `φ(x)` are treated as constants in the epistemic term.
    pub(crate) fn backward_cached(&self, cache: &Cache, grad: &Matrix) -> Result<Vec<MlpParams>> {
        let (k_heads, n) = grad.shape();
        match (&self.body, cache) {
            (Body::Vanilla { members }, Cache::Vanilla(traces)) => members
                .iter()
                .zip(traces)
                .enumerate()
                .map(|(k, (m, t))| {
                    let up = Matrix::column(grad.row(k));
                    Ok(m.backward_trace(t, &up, false)?.0)
                })
                .collect(),
            (Body::SharedBase { learnable, .. }, Cache::SharedBase(t)) => {
                Ok(vec![learnable.backward_trace(t, &grad.transpose(), false)?.0])
            }
            (
                Body::Epinet {
                    base,
                    epi_trainable,
                    indices,
                    ..
                },
                Cache::Epinet {
                    base: bt,
                    trainable: tt,
                },
            ) => {
                let d = indices.cols();
                let base_up = Matrix::from_fn(n, 1, |i, _| (0..k_heads).map(|k| grad.get(k, i)).sum());
                let mut tr_up = Matrix::zeros(k_heads * n, d);
                for k in 0..k_heads {
                    let z = indices.row(k);
                    for i in 0..n {
                        let g = grad.get(k, i);
                        for (o, &zj) in tr_up.row_mut(k * n + i).iter_mut().zip(z) {
                            *o = g * zj;
                        }
                    }
                }
                Ok(vec![
                    base.backward_trace(bt, &base_up, false)?.0,
                    epi_trainable.backward_trace(tt, &tr_up, false)?.0,
                ])
            }
            _ => Err(Error::invalid("cache does not match ensemble variant")),
        }
    }
}

/// Population variance over rows (heads) for each column (input).
pub fn head_variance(outputs: &Matrix) -> Vec<f64> {
    let k = outputs.rows() as f64;
    (0..outputs.cols())
        .map(|n| {
            let mean = (0..outputs.rows()).map(|h| outputs.get(h, n)).sum::<f64>() / k;
            (0..outputs.rows())
                .map(|h| (outputs.get(h, n) - mean).powi(2))
                .sum::<f64>()
                / k
        })
        .collect()
}
