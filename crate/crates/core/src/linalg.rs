//! Scalar kernels and small dense linear-algebra helpers.

use alloc::vec::Vec;

use libm::{exp, log1p};
use nalgebra::{DMatrix, DVector};

/// Logistic sigmoid, evaluated in the branch form that never overflows.
#[inline]
pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + exp(-s))
    } else {
        let e = exp(s);
        e / (1.0 + e)
    }
}

/// `log σ(s)` without cancellation.
#[inline]
pub fn log_sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        -log1p(exp(-s))
    } else {
        s - log1p(exp(s))
    }
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Symmetric eigendecomposition; eigenvalues in ascending order with the
/// matching eigenvector columns.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `V diag(d) Vᵀ`, symmetrized.
pub fn from_eigen(vectors: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    let n = vectors.nrows();
    let mut scaled = vectors.clone();
    for (c, &dc) in d.iter().enumerate() {
        for r in 0..n {
            scaled[(r, c)] *= dc;
        }
    }
    let mut out = scaled * vectors.transpose();
    symmetrize(&mut out);
    out
}

/// Solves `M x = b` for symmetric positive-definite `M`; `None` if the
/// Cholesky factorization fails.
pub fn spd_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let chol = m.clone().cholesky()?;
    Some(chol.solve(b))
}
