//! Diverse efficient ensembles and test-time hypothesis reweighting.
//!
//! An ensemble of K heads is trained once; at test time a handful of labeled
//! target points reweight the heads by `softmax(-cumulative loss)` without any
//! further gradient steps.

pub mod active;
pub mod analysis;
pub mod ensemble;
pub mod experiment;
pub mod error;
pub mod hyre;
pub mod linalg;
pub mod nn;
pub mod rng;
pub mod tasks;

pub use error::{Error, Result, StageExt};
pub use nn::Matrix;
