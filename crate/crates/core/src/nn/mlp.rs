//! Fixed-topology multi-layer perceptrons with analytic reverse-mode gradients.
//!
//! A layer computes `activation(x · Wᵀ + b)` with `W` stored as `out × in`.
//! Inputs are batched row-wise: an `N × in` matrix maps to `N × out`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::invalid(format!("unknown activation `{other}`"))),
        }
    }
}

/// Weight initialization scheme. Biases always start at zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, the Kaiming-uniform default of common frameworks.
    #[default]
    FanInUniform,
    /// `U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out)))`.
    XavierUniform,
    Zeros,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `out × in`.
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

/// Draws parameters for an MLP with the given layer widths.
///
/// Hidden layers use `activation`; the output layer is linear. Identical
/// arguments give bitwise-identical parameters.
pub fn init_params(
    layer_sizes: &[usize],
    activation: Activation,
    seed: u64,
    scheme: InitScheme,
) -> Result<MlpParams> {
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
        return Err(Error::invalid(format!(
            "layer sizes must have at least two positive entries, got {layer_sizes:?}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let n_layers = layer_sizes.len() - 1;
    let layers = layer_sizes
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = match scheme {
                InitScheme::FanInUniform => 1.0 / (fan_in as f64).sqrt(),
                InitScheme::XavierUniform => (6.0 / (fan_in + fan_out) as f64).sqrt(),
                InitScheme::Zeros => 0.0,
            };
            let weight = Matrix::from_fn(fan_out, fan_in, |_, _| {
                if bound == 0.0 {
                    0.0
                } else {
                    rng.random_range(-bound..bound)
                }
            });
            Layer {
                weight,
                bias: vec![0.0; fan_out],
                activation: if i + 1 == n_layers {
                    Activation::Identity
                } else {
                    activation
                },
            }
        })
        .collect();
    Ok(MlpParams { layers })
}

/// Cached intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// `inputs[i]` is the input to layer `i`; the last entry is the network output.
    activations: Vec<Matrix>,
    pre_activations: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("trace holds the input")
    }

    /// Activations entering layer `i` (index 0 is the network input).
    pub fn layer_input(&self, i: usize) -> &Matrix {
        &self.activations[i]
    }

    /// Output of the last hidden layer, or the input for single-layer nets.
    pub fn last_hidden(&self) -> &Matrix {
        &self.activations[self.activations.len() - 2]
    }
}

impl MlpParams {
    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn last_hidden_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].in_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.rows() * l.weight.cols() + l.bias.len())
            .sum()
    }

    /// A zero-valued copy with identical shapes.
    pub fn zeros_like(&self) -> MlpParams {
        MlpParams {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Matrix::zeros(l.weight.rows(), l.weight.cols()),
                    bias: vec![0.0; l.bias.len()],
                    activation: l.activation,
                })
                .collect(),
        }
    }

    pub fn same_shape(&self, other: &MlpParams) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weight.shape() == b.weight.shape() && a.bias.len() == b.bias.len())
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.data().iter().chain(l.bias.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.data_mut().iter_mut().chain(l.bias.iter_mut()))
    }

    /// `self += alpha * other` over every parameter.
    pub fn add_scaled(&mut self, alpha: f64, other: &MlpParams) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::invalid("parameter shapes differ"));
        }
        for (a, &b) in self.values_mut().zip(other.values()) {
            *a += alpha * b;
        }
        Ok(())
    }

    fn check_input(&self, inputs: &Matrix) -> Result<()> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "network expects {} input features, got {}",
                self.input_dim(),
                inputs.cols()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, inputs: &Matrix) -> Result<Matrix> {
        self.check_input(inputs)?;
        let mut x = inputs.clone();
        for layer in &self.layers {
            let mut z = x.matmul_t(&layer.weight)?;
            add_bias_and_activate(&mut z, layer);
            x = z;
        }
        Ok(x)
    }

    /// Forward pass keeping the intermediates needed by [`ForwardTrace::backward`].
    pub fn forward_trace(&self, inputs: &Matrix) -> Result<ForwardTrace> {
        self.check_input(inputs)?;
        let mut activations = vec![inputs.clone()];
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = activations.last().expect("non-empty");
            let mut z = x.matmul_t(&layer.weight)?;
            for r in 0..z.rows() {
                for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            let a = match layer.activation {
                Activation::Identity => z.clone(),
                act => z.map(|v| act.apply(v)),
            };
            pre_activations.push(z);
            activations.push(a);
        }
        Ok(ForwardTrace {
            activations,
            pre_activations,
        })
    }

    /// Reverse-mode gradients of `⟨upstream, forward(inputs)⟩`.
    ///
    /// Returns parameter gradients (same shapes as `self`) and input gradients.
    pub fn backward(&self, inputs: &Matrix, upstream: &Matrix) -> Result<(MlpParams, Matrix)> {
        let trace = self.forward_trace(inputs)?;
        self.backward_trace(&trace, upstream, true)
            .map(|(g, dx)| (g, dx.expect("requested")))
    }

    /// Backward pass over a cached trace. Input gradients are only formed when requested.
    pub fn backward_trace(
        &self,
        trace: &ForwardTrace,
        upstream: &Matrix,
        want_input_grad: bool,
    ) -> Result<(MlpParams, Option<Matrix>)> {
        let out = trace.output();
        if upstream.shape() != out.shape() {
            return Err(Error::invalid(format!(
                "upstream gradient is {}x{}, output is {}x{}",
                upstream.rows(),
                upstream.cols(),
                out.rows(),
                out.cols()
            )));
        }
        let mut grads = self.zeros_like();
        let mut delta = upstream.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation != Activation::Identity {
                let z = &trace.pre_activations[i];
                let a = &trace.activations[i + 1];
                for ((d, &zv), &av) in delta.data_mut().iter_mut().zip(z.data()).zip(a.data()) {
                    *d *= layer.activation.derivative(zv, av);
                }
            }
            let x = &trace.activations[i];
            grads.layers[i].weight = delta.t_matmul(x)?;
            grads.layers[i].bias = delta.col_sums();
            if i > 0 || want_input_grad {
                delta = delta.matmul(&layer.weight)?;
            }
        }
        Ok((grads, want_input_grad.then_some(delta)))
    }
}

fn add_bias_and_activate(z: &mut Matrix, layer: &Layer) {
    let act = layer.activation;
    for r in 0..z.rows() {
        for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
            *v = act.apply(*v + b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        let a = init_params(&[1, 1], Activation::Relu, 7, InitScheme::FanInUniform).unwrap();
        let b = init_params(&[1, 1], Activation::Relu, 7, InitScheme::FanInUniform).unwrap();
        let bits = |p: &MlpParams| p.values().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn zeros_scheme() {
        let p = init_params(&[3, 4, 2], Activation::Tanh, 1, InitScheme::Zeros).unwrap();
        assert!(p.values().all(|&v| v == 0.0));
    }

    #[test]
    fn param_count_of_uci_net() {
        let p = init_params(&[8, 50, 50, 1], Activation::Relu, 0, InitScheme::default()).unwrap();
        assert_eq!(p.param_count(), 8 * 50 + 50 + 50 * 50 + 50 + 50 + 1);
        assert_eq!(p.param_count(), 3051);
        assert_eq!(p.layers[2].activation, Activation::Identity);
    }

    #[test]
    fn rejects_bad_sizes() {
        for sizes in [&[][..], &[3][..], &[3, 0, 1][..]] {
            assert!(matches!(
                init_params(sizes, Activation::Relu, 0, InitScheme::default()),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn affine_layer_is_exact() {
        let params = MlpParams {
            layers: vec![Layer {
                weight: Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap(),
                bias: vec![0.25, -1.0],
                activation: Activation::Identity,
            }],
        };
        let x = Matrix::from_rows(&[vec![2.0, 1.0]]).unwrap();
        let y = params.forward(&x).unwrap();
        assert_eq!(y.data(), &[2.0 - 2.0 + 0.25, 1.0 + 3.0 - 1.0]);

        // dW = upstreamᵀ · x
        let up = Matrix::from_rows(&[vec![1.0, -1.0]]).unwrap();
        let (g, dx) = params.backward(&x, &up).unwrap();
        assert_eq!(g.layers[0].weight, up.t_matmul(&x).unwrap());
        assert_eq!(g.layers[0].bias, vec![1.0, -1.0]);
        assert_eq!(dx.data(), &[1.0 - 0.5, -2.0 - 3.0]);
    }

    #[test]
    fn zero_relu_net_outputs_zero() {
        let p = init_params(&[3, 5, 2], Activation::Relu, 0, InitScheme::Zeros).unwrap();
        let x = Matrix::from_fn(4, 3, |r, c| (r + c) as f64 - 2.0);
        assert!(p.forward(&x).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let p = init_params(&[3, 5, 2], Activation::Tanh, 3, InitScheme::default()).unwrap();
        let x = Matrix::from_fn(4, 3, |r, c| (r * 3 + c) as f64 * 0.1);
        let (g, dx) = p.backward(&x, &Matrix::zeros(4, 2)).unwrap();
        assert!(g.values().all(|&v| v == 0.0));
        assert!(dx.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let p = init_params(&[3, 2], Activation::Relu, 0, InitScheme::default()).unwrap();
        assert!(p.forward(&Matrix::zeros(1, 4)).is_err());
        assert!(p.backward(&Matrix::zeros(1, 3), &Matrix::zeros(1, 3)).is_err());
    }
}
