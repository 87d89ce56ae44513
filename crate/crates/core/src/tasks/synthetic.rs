//! Synthetic underspecified tasks: Bradley-Terry preferences, conflicting linear
//! labelers, and the orthant-to-cube shift task.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::ensemble::sigmoid;
use crate::error::{Error, Result};
use crate::nn::{dot, Matrix};
use crate::rng::{self, Rng};

/// `P(i ≻ j) = e^{θ_i} / (e^{θ_i} + e^{θ_j})`.
pub fn bt_preference_prob(theta_i: f64, theta_j: f64) -> f64 {
    sigmoid(theta_i - theta_j)
}

/// A deterministic labeler `x ↦ 1[w·x > 0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelerBoundary {
    pub w: Vec<f64>,
}

impl LabelerBoundary {
    pub fn sample(dim: usize, rng: &mut Rng) -> Self {
        Self {
            w: (0..dim).map(|_| StandardNormal.sample(rng)).collect(),
        }
    }

    pub fn label(&self, x: &[f64]) -> bool {
        dot(&self.w, x) > 0.0
    }

    pub fn label_rows(&self, x: &Matrix) -> Vec<bool> {
        (0..x.rows()).map(|i| self.label(x.row(i))).collect()
    }

    pub fn labeled(&self, x: Matrix) -> Dataset {
        let y = self.label_rows(&x);
        Dataset::binary(x, y).expect("one label per row")
    }

    /// Fraction of rows on which two labelers agree.
    pub fn agreement(&self, other: &LabelerBoundary, x: &Matrix) -> f64 {
        let same = (0..x.rows())
            .filter(|&i| self.label(x.row(i)) == other.label(x.row(i)))
            .count();
        same as f64 / x.rows() as f64
    }
}

pub fn uniform_box(n: usize, dim: usize, lo: f64, hi: f64, rng: &mut Rng) -> Matrix {
    let u = Uniform::new(lo, hi).expect("valid range");
    Matrix::from_fn(n, dim, |_, _| u.sample(rng))
}

#[derive(Clone, Debug)]
pub struct ConflictingTask {
    /// Points in `[0, 1]²`, each labeled by a labeler drawn uniformly from the population.
    pub train: Dataset,
    pub labelers: Vec<LabelerBoundary>,
    /// Reserved boundary that adaptation has to recover.
    pub held_out: LabelerBoundary,
}

pub fn gen_conflicting_preferences(n_labelers: usize, n_points: usize, seed: u64) -> Result<ConflictingTask> {
    if n_labelers == 0 || n_points == 0 {
        return Err(Error::invalid("need at least one labeler and one point"));
    }
    let mut r = rng::seeded(seed);
    let labelers: Vec<LabelerBoundary> = (0..n_labelers).map(|_| LabelerBoundary::sample(2, &mut r)).collect();
    let held_out = LabelerBoundary::sample(2, &mut r);
    let x = uniform_box(n_points, 2, 0.0, 1.0, &mut r);
    let y = (0..n_points)
        .map(|i| labelers[r.random_range(0..n_labelers)].label(x.row(i)))
        .collect();
    Ok(ConflictingTask {
        train: Dataset::binary(x, y)?,
        labelers,
        held_out,
    })
}

#[derive(Clone, Debug)]
pub struct HypercubeTask {
    /// Label 1 on `[0, 1]⁵`, label 0 on `[−1, 0]⁵`, alternating.
    pub train: Dataset,
    /// Uniform on `[−1, 1]⁵` labeled by `boundary`.
    pub target: Dataset,
    pub boundary: LabelerBoundary,
}

pub const HYPERCUBE_DIM: usize = 5;

pub fn gen_hypercube_task(seed: u64) -> Result<HypercubeTask> {
    gen_hypercube_task_sized(512, 2048, seed)
}

pub fn gen_hypercube_task_sized(n_train: usize, n_target: usize, seed: u64) -> Result<HypercubeTask> {
    if n_train < 2 || n_target == 0 {
        return Err(Error::invalid("hypercube task needs two train points and one target point"));
    }
    let mut r = rng::seeded(seed);
    let boundary = LabelerBoundary::sample(HYPERCUBE_DIM, &mut r);
    let pos = Uniform::new(0.0, 1.0).expect("valid range");
    let mut x = Matrix::zeros(n_train, HYPERCUBE_DIM);
    let mut y = Vec::with_capacity(n_train);
    for i in 0..n_train {
        let label = i % 2 == 0;
        for v in x.row_mut(i) {
            let u = pos.sample(&mut r);
            *v = if label { u } else { -u };
        }
        y.push(label);
    }
    let train = Dataset::binary(x, y)?;
    let target = boundary.labeled(uniform_box(n_target, HYPERCUBE_DIM, -1.0, 1.0, &mut r));
    Ok(HypercubeTask {
        train,
        target,
        boundary,
    })
}
