//! Function-space PCA of ensemble predictions.
//!
//! Heads are treated as points in `ℝᴹ` (one coordinate per input). After removing the
//! per-input mean over heads, the residual matrix `R` (K × M) is factored by SVD.
//! Member-space components are rows of `C` (P × K); component functions are
//! `u_i = C_i · R`, so head `k`'s residual is `Σ_i C_ik u_i` at full rank.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::active::probabilities;
use crate::ensemble::head_variance;
use crate::error::{Error, Result};
use crate::linalg::jacobi_svd;
use crate::nn::Matrix;
use crate::tasks::TaskKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionMatrix {
    /// `K × M`.
    pub values: Matrix,
    /// Identifier of each input column.
    pub inputs: Vec<usize>,
}

impl PredictionMatrix {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::invalid("prediction matrix needs at least one head and input"));
        }
        if !values.is_finite() {
            return Err(Error::numeric("non-finite prediction"));
        }
        let inputs = (0..values.cols()).collect();
        Ok(Self { values, inputs })
    }

    /// Head outputs as analysed: probabilities for binary tasks, raw values otherwise.
    pub fn from_outputs(outputs: &Matrix, kind: TaskKind) -> Result<Self> {
        match kind {
            TaskKind::Binary => Self::new(probabilities(outputs)),
            _ => Self::new(outputs.clone()),
        }
    }

    pub fn heads(&self) -> usize {
        self.values.rows()
    }

    pub fn len(&self) -> usize {
        self.values.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.cols() == 0
    }

    /// Mean over heads for each input.
    pub fn mean(&self) -> Vec<f64> {
        let k = self.heads() as f64;
        self.values.col_sums().into_iter().map(|s| s / k).collect()
    }

    /// Per-input variance over heads. For binary tasks this is measured on
    /// probabilities, so saturated logits of differing magnitude count as agreement.
    pub fn disagreement(&self) -> Vec<f64> {
        head_variance(&self.values)
    }
}

/// Predictions minus their per-input mean over heads.
pub fn residual_matrix(preds: &PredictionMatrix) -> PredictionMatrix {
    let mean = preds.mean();
    let values = Matrix::from_fn(preds.heads(), preds.len(), |k, n| preds.values.get(k, n) - mean[n]);
    PredictionMatrix {
        values,
        inputs: preds.inputs.clone(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaSummary {
    /// Mean prediction per input, length M.
    pub mean: Vec<f64>,
    /// `P × K`, orthonormal rows.
    pub components: Matrix,
    /// `P × M`, `u_i = C_i · R`.
    pub functions: Matrix,
    pub singular_values: Vec<f64>,
    /// Eigenvalues of the member-space covariance `R Rᵀ / M`, i.e. `σ_i² / M`.
    pub explained_variance: Vec<f64>,
    /// Trace of `R Rᵀ / M` over all components.
    pub total_variance: f64,
}

/// Top-`p` principal components of the predictions (centered internally, so residuals
/// may be passed directly). Signs make each component's largest-magnitude entry positive.
pub fn function_pca(preds: &PredictionMatrix, p: usize) -> Result<PcaSummary> {
    let (k, m) = preds.values.shape();
    if p == 0 || p > k.min(m) {
        return Err(Error::invalid(format!(
            "component count {p} outside 1..={}",
            k.min(m)
        )));
    }
    let mean = preds.mean();
    let resid = residual_matrix(preds).values;
    let svd = jacobi_svd(&resid.transpose());
    let mm = m as f64;

    let mut components = Matrix::zeros(p, k);
    let mut functions = Matrix::zeros(p, m);
    for i in 0..p {
        let c = svd.right.col_vec(i);
        let mut pivot = 0;
        for (j, v) in c.iter().enumerate() {
            if v.abs() > c[pivot].abs() {
                pivot = j;
            }
        }
        let sign = if c[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (j, v) in c.iter().enumerate() {
            components.set(i, j, sign * v);
        }
        for n in 0..m {
            functions.set(i, n, sign * svd.scaled_left.get(n, i));
        }
    }
    let singular_values: Vec<f64> = svd.singular_values[..p].to_vec();
    Ok(PcaSummary {
        mean,
        components,
        functions,
        explained_variance: singular_values.iter().map(|s| s * s / mm).collect(),
        total_variance: svd.singular_values.iter().map(|s| s * s / mm).sum(),
        singular_values,
    })
}

impl PcaSummary {
    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    /// Reconstruction coefficients of head `k`: its projection onto each component.
    pub fn head_coefficients(&self, k: usize) -> Vec<f64> {
        self.components.col_vec(k)
    }

    /// Component functions rescaled to unit norm (zero functions stay zero).
    pub fn unit_functions(&self) -> Matrix {
        Matrix::from_fn(self.functions.rows(), self.functions.cols(), |i, n| {
            let s = self.singular_values[i];
            if s > 0.0 {
                self.functions.get(i, n) / s
            } else {
                0.0
            }
        })
    }

    /// Writes `pca_means.csv`, `pca_components.csv`, `pca_functions.csv` and
    /// `pca_variance.csv`. When `inputs` is given, its coordinates label each input.
    pub fn write_csv(&self, dir: &Path, inputs: Option<&Matrix>) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let coords = |n: usize| -> String {
            inputs
                .map(|x| x.row(n).iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"))
                .unwrap_or_default()
        };
        let unit = self.unit_functions();
        let write = |name: &str, body: String| -> Result<()> {
            let path = dir.join(name);
            let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            f.write_all(body.as_bytes()).map_err(|e| Error::io(&path, e))
        };
        let mut s = String::from("input,x,mean\n");
        for (n, v) in self.mean.iter().enumerate() {
            s += &format!("{n},{},{v}\n", coords(n));
        }
        write("pca_means.csv", s)?;
        let mut s = String::from("component,head,value\n");
        for i in 0..self.n_components() {
            for k in 0..self.components.cols() {
                s += &format!("{i},{k},{}\n", self.components.get(i, k));
            }
        }
        write("pca_components.csv", s)?;
        let mut s = String::from("component,input,x,unit,scaled\n");
        for i in 0..self.n_components() {
            for n in 0..self.functions.cols() {
                s += &format!("{i},{n},{},{},{}\n", coords(n), unit.get(i, n), self.functions.get(i, n));
            }
        }
        write("pca_functions.csv", s)?;
        let ratio = explained_variance_ratio(self);
        let mut s = String::from("component,singular_value,explained_variance,ratio\n");
        for i in 0..self.n_components() {
            s += &format!(
                "{i},{},{},{}\n",
                self.singular_values[i], self.explained_variance[i], ratio[i]
            );
        }
        write("pca_variance.csv", s)
    }
}

/// `p̄ + Σ_i w_i u_i`.
pub fn reconstruct(summary: &PcaSummary, coeffs: &[f64]) -> Result<Vec<f64>> {
    if coeffs.len() != summary.n_components() {
        return Err(Error::invalid(format!(
            "{} coefficients for {} components",
            coeffs.len(),
            summary.n_components()
        )));
    }
    let mut out = summary.mean.clone();
    for (i, w) in coeffs.iter().enumerate() {
        for (o, u) in out.iter_mut().zip(summary.functions.row(i)) {
            *o += w * u;
        }
    }
    Ok(out)
}

/// Share of the total residual variance captured by each retained component.
pub fn explained_variance_ratio(summary: &PcaSummary) -> Vec<f64> {
    if summary.total_variance <= 0.0 {
        return vec![0.0; summary.n_components()];
    }
    summary
        .explained_variance
        .iter()
        .map(|v| (v / summary.total_variance).clamp(0.0, 1.0))
        .collect()
}
