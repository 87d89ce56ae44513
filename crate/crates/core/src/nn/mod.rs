//! Dense numerical core: matrices, MLPs with backpropagation, and first-order optimizers.

mod matrix;
mod mlp;
mod optim;

pub use matrix::{dot, Matrix};
pub use mlp::{init_params, Activation, ForwardTrace, InitScheme, Layer, MlpParams};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};
