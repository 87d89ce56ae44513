//! K-head diverse ensembles: vanilla, shared-base with a frozen prior, and epinet.

mod config;
mod model;
mod train;

pub use config::{Architecture, EnsembleConfig, LossKind, TrainConfig};
pub use model::{build_ensemble, head_variance, Body, EnsembleModel};
pub use train::sigmoid;
