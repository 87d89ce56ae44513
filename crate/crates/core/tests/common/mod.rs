#![allow(dead_code)]

use hyre_core::ensemble::{Body, EnsembleModel};
use hyre_core::nn::MlpParams;
use hyre_core::rng::{self, Rng};
use hyre_core::Matrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> Rng {
    rng::seeded(seed)
}

pub fn normal_matrix(rows: usize, cols: usize, r: &mut Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(r))
}

pub fn uniform_vec(n: usize, lo: f64, hi: f64, r: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| r.random_range(lo..hi)).collect()
}

pub fn simplex(k: usize, r: &mut Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| r.random_range(0.01..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// `|a - b| <= tol * max(|a|, |b|)`, with an absolute floor for entries near zero.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()) + 1e-9
}

pub fn flat(p: &MlpParams) -> Vec<f64> {
    p.values().copied().collect()
}

pub fn set_flat(p: &mut MlpParams, i: usize, v: f64) {
    *p.values_mut().nth(i).expect("index in range") = v;
}

/// Worst relative error between analytic gradients and central differences of
/// `objective` over `n` coordinates drawn from `candidates` (block, flat index).
pub fn fd_check_model(
    model: &EnsembleModel,
    objective: impl Fn(&EnsembleModel) -> f64,
    grads: &[MlpParams],
    candidates: &[(usize, usize)],
    n: usize,
    r: &mut Rng,
) -> (f64, usize) {
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..n {
        let (b, i) = candidates[r.random_range(0..candidates.len())];
        let base = flat(model.learnable()[b])[i];
        let eval = |v: f64| {
            let mut m = model.clone();
            set_flat(m.learnable_mut()[b], i, v);
            objective(&m)
        };
        let fd = (eval(base + h) - eval(base - h)) / (2.0 * h);
        let an = flat(&grads[b])[i];
        let err = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
        if !rel_close(an, fd, 1e-4) {
            failures += 1;
        }
        worst = worst.max(err);
    }
    (worst, failures)
}

/// Coordinates whose perturbation leaves the epinet features `φ(x)` unchanged: the base
/// output layer and every trainable epistemic parameter.
pub fn epinet_candidates(m: &EnsembleModel) -> Vec<(usize, usize)> {
    let blocks = m.learnable();
    let base = blocks[0];
    let last = base.layers.last().unwrap();
    let before: usize = base.layers[..base.layers.len() - 1]
        .iter()
        .map(|l| l.weight.rows() * l.weight.cols() + l.bias.len())
        .sum();
    let tail = last.weight.rows() * last.weight.cols() + last.bias.len();
    (before..before + tail)
        .map(|i| (0, i))
        .chain((0..blocks[1].param_count()).map(|i| (1, i)))
        .collect()
}

/// Every learnable coordinate, except that epinet checks use [`epinet_candidates`].
pub fn gradient_candidates(m: &EnsembleModel) -> Vec<(usize, usize)> {
    if matches!(m.body, Body::Epinet { .. }) {
        return epinet_candidates(m);
    }
    m.learnable()
        .iter()
        .enumerate()
        .flat_map(|(b, p)| (0..p.param_count()).map(move |i| (b, i)))
        .collect()
}
