//! Squared-exponential Gaussian process prior, posterior, and pathwise posterior draws.

use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{cho_solve, cholesky_jittered, solve_lower};
use crate::nn::Matrix;
use crate::rng::{self, Rng};

/// Largest diagonal jitter tried before a factorization is declared failed.
pub const MAX_JITTER: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpSpec {
    pub signal_variance: f64,
    pub lengthscale: f64,
    pub noise_variance: f64,
    /// First jitter tried when a kernel matrix is not numerically positive definite.
    pub jitter: f64,
}

impl Default for GpSpec {
    fn default() -> Self {
        Self {
            signal_variance: 1.0,
            lengthscale: 0.2,
            noise_variance: 0.0,
            jitter: 1e-12,
        }
    }
}

impl GpSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.signal_variance > 0.0 && self.lengthscale > 0.0) {
            return Err(Error::invalid("kernel variance and lengthscale must be positive"));
        }
        if !(self.noise_variance >= 0.0 && self.jitter > 0.0 && self.jitter <= MAX_JITTER) {
            return Err(Error::invalid("noise must be non-negative and jitter in (0, 1e-6]"));
        }
        Ok(())
    }

    /// `σ² exp(-|a - b|² / 2ℓ²)`.
    pub fn k(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        self.signal_variance * (-d2 / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }

    pub fn kernel(&self, a: &Matrix, b: &Matrix) -> Result<Matrix> {
        if a.cols() != b.cols() {
            return Err(Error::invalid("kernel inputs differ in dimension"));
        }
        Ok(Matrix::from_fn(a.rows(), b.rows(), |i, j| self.k(a.row(i), b.row(j))))
    }

    fn factor(&self, mut gram: Matrix, noise: f64) -> Result<Matrix> {
        for i in 0..gram.rows() {
            gram.set(i, i, gram.get(i, i) + noise);
        }
        Ok(cholesky_jittered(&gram, self.jitter, MAX_JITTER)?.0)
    }
}

/// Conditional mean and covariance at `query` given the regression data in `train`.
pub fn gp_posterior(spec: &GpSpec, train: &Dataset, query: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    spec.validate()?;
    let y = train
        .real_targets()
        .ok_or_else(|| Error::invalid("gp posterior needs regression targets"))?;
    let l = spec.factor(spec.kernel(&train.x, &train.x)?, spec.noise_variance)?;
    let kqx = spec.kernel(query, &train.x)?;
    let alpha = cho_solve(&l, &Matrix::column(y));
    let mean = kqx.matmul(&alpha)?.into_data();
    let v = solve_lower(&l, &kqx.transpose());
    let mut cov = spec.kernel(query, query)?;
    cov.axpy(-1.0, &v.t_matmul(&v)?)?;
    Ok((mean, cov))
}

/// `n_draws × N` samples of the prior at the rows of `inputs`.
pub fn sample_gp_prior(spec: &GpSpec, inputs: &Matrix, n_draws: usize, rng: &mut Rng) -> Result<Matrix> {
    spec.validate()?;
    let l = spec.factor(spec.kernel(inputs, inputs)?, 0.0)?;
    let z = Matrix::from_fn(inputs.rows(), n_draws, |_, _| StandardNormal.sample(rng));
    Ok(l.matmul(&z)?.transpose())
}

/// Posterior draws at `query` by pathwise conditioning: a joint prior draw over the
/// training and query inputs is corrected by `K_qx (K_xx + σ_n² I)⁻¹ (y − f(X) − ε)`.
///
/// Query rows identical to a training row share its prior value, so noiseless draws
/// reproduce the training targets there up to solver roundoff.
pub fn sample_gp_posterior(
    spec: &GpSpec,
    train: &Dataset,
    query: &Matrix,
    n_draws: usize,
    rng: &mut Rng,
) -> Result<Matrix> {
    spec.validate()?;
    let y = train
        .real_targets()
        .ok_or_else(|| Error::invalid("gp posterior needs regression targets"))?;
    let n = train.len();

    // Union of training and query inputs with exact duplicates merged.
    let mut union: Vec<Vec<f64>> = (0..n).map(|i| train.x.row(i).to_vec()).collect();
    let mut slot = Vec::with_capacity(query.rows());
    for q in 0..query.rows() {
        let row = query.row(q);
        match union.iter().position(|u| u.as_slice() == row) {
            Some(i) => slot.push(i),
            None => {
                slot.push(union.len());
                union.push(row.to_vec());
            }
        }
    }
    let points = Matrix::from_rows(&union)?;
    let joint = sample_gp_prior(spec, &points, n_draws, rng)?;

    let lx = spec.factor(spec.kernel(&train.x, &train.x)?, spec.noise_variance)?;
    let kqx = spec.kernel(query, &train.x)?;
    let noise_sd = spec.noise_variance.sqrt();
    let mut out = Matrix::zeros(n_draws, query.rows());
    for d in 0..n_draws {
        let f = joint.row(d);
        let resid: Vec<f64> = (0..n)
            .map(|i| {
                let eps: f64 = StandardNormal.sample(rng);
                y[i] - f[i] - noise_sd * eps
            })
            .collect();
        let alpha = cho_solve(&lx, &Matrix::column(&resid));
        let correction = kqx.matmul(&alpha)?;
        for (q, &s) in slot.iter().enumerate() {
            out.set(d, q, f[s] + correction.get(q, 0));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct GpSample {
    pub train: Dataset,
    pub test_inputs: Matrix,
    /// `n_draws × n_test`: each row is one candidate target function on the test inputs.
    pub posterior_draws: Matrix,
}

/// Training inputs uniform on `[0, 1]` (sorted) with targets from the prior,
/// test inputs on an even grid over `[0, 1]`, and posterior draws over the grid.
pub fn sample_gp_dataset(
    spec: &GpSpec,
    n_train: usize,
    n_test: usize,
    n_draws: usize,
    seed: u64,
) -> Result<GpSample> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::invalid("gp dataset needs train and test inputs"));
    }
    let mut r = rng::seeded(seed);
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let mut xs: Vec<f64> = (0..n_train).map(|_| unit.sample(&mut r)).collect();
    xs.sort_by(f64::total_cmp);
    let x = Matrix::column(&xs);
    let mut y = sample_gp_prior(spec, &x, 1, &mut r)?.into_data();
    if spec.noise_variance > 0.0 {
        let sd = spec.noise_variance.sqrt();
        for v in &mut y {
            let e: f64 = StandardNormal.sample(&mut r);
            *v += sd * e;
        }
    }
    let train = Dataset::regression(x, y)?;
    let denom = (n_test.max(2) - 1) as f64;
    let test_inputs = Matrix::from_fn(n_test, 1, |i, _| i as f64 / denom);
    let posterior_draws = sample_gp_posterior(spec, &train, &test_inputs, n_draws, &mut r)?;
    Ok(GpSample {
        train,
        test_inputs,
        posterior_draws,
    })
}
