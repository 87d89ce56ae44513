//! Small dense factorizations: Cholesky with jitter escalation, triangular solves,
//! and a one-sided Jacobi SVD.

use crate::error::{Error, Result};
use crate::nn::{dot, Matrix};

/// Lower-triangular Cholesky factor of a symmetric matrix, or `None` if it is not
/// numerically positive definite.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    let n = a.rows();
    debug_assert_eq!(n, a.cols());
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let row_j = &l.row(j)[..j];
        let d = a.get(j, j) - dot(row_j, row_j);
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l.set(j, j, djj);
        for i in j + 1..n {
            let s = a.get(i, j) - dot(&l.row(i)[..j], &l.row(j)[..j]);
            l.set(i, j, s / djj);
        }
    }
    Some(l)
}

/// Cholesky of `a + jitter·I`, escalating the jitter tenfold from `start` until `max`.
///
/// Returns the factor and the jitter that was used.
pub fn cholesky_jittered(a: &Matrix, start: f64, max: f64) -> Result<(Matrix, f64)> {
    if a.rows() != a.cols() {
        return Err(Error::invalid("cholesky needs a square matrix"));
    }
    if let Some(l) = cholesky(a) {
        return Ok((l, 0.0));
    }
    let mut jitter = start;
    while jitter <= max * (1.0 + 1e-12) {
        let mut shifted = a.clone();
        for i in 0..a.rows() {
            shifted.set(i, i, a.get(i, i) + jitter);
        }
        if let Some(l) = cholesky(&shifted) {
            return Ok((l, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::numeric(format!(
        "cholesky failed for a {}x{} matrix with jitter up to {max:e}",
        a.rows(),
        a.cols()
    )))
}

/// Solves `L X = B` for lower-triangular `L`.
pub fn solve_lower(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows();
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = x.get(i, c);
            for k in 0..i {
                s -= l.get(i, k) * x.get(k, c);
            }
            x.set(i, c, s / l.get(i, i));
        }
    }
    x
}

/// Solves `Lᵀ X = B` for lower-triangular `L`.
pub fn solve_lower_t(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows();
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in (0..n).rev() {
            let mut s = x.get(i, c);
            for k in i + 1..n {
                s -= l.get(k, i) * x.get(k, c);
            }
            x.set(i, c, s / l.get(i, i));
        }
    }
    x
}

/// Solves `A X = B` given the Cholesky factor `L` of `A`.
pub fn cho_solve(l: &Matrix, b: &Matrix) -> Matrix {
    solve_lower_t(l, &solve_lower(l, b))
}

/// Thin SVD of an `m × n` matrix by one-sided Jacobi rotations on its columns.
pub struct ColumnSvd {
    /// Singular values, non-increasing.
    pub singular_values: Vec<f64>,
    /// `n × n` right singular vectors; column `i` pairs with `singular_values[i]`.
    pub right: Matrix,
    /// `m × n` matrix `A·V` whose column `i` is `σ_i · u_i`.
    pub scaled_left: Matrix,
}

pub fn jacobi_svd(a: &Matrix) -> ColumnSvd {
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.col_vec(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let tol = 1e-15;
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let singular_values = order.iter().map(|&i| norms[i]).collect();
    let right = Matrix::from_fn(n, n, |r, c| v[order[c]][r]);
    let scaled_left = Matrix::from_fn(m, n, |r, c| cols[order[c]][r]);
    ColumnSvd {
        singular_values,
        right,
        scaled_left,
    }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}
