//! Dense helpers shared by the encoder and the statistics code.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

const COL_CHUNK: usize = 64;

/// `a * b`, parallel over column chunks of `b`.
pub fn par_mul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions differ");
    let n = b.ncols();
    if n <= COL_CHUNK || a.nrows() * a.ncols() < 4096 {
        return a * b;
    }
    let starts: Vec<usize> = (0..n).step_by(COL_CHUNK).collect();
    let parts: Vec<DMatrix<f64>> = starts
        .par_iter()
        .map(|&s| {
            let w = COL_CHUNK.min(n - s);
            a * b.columns(s, w)
        })
        .collect();
    let mut out = DMatrix::zeros(a.nrows(), n);
    for (s, p) in starts.into_iter().zip(parts) {
        out.columns_mut(s, p.ncols()).copy_from(&p);
    }
    out
}

/// `x * xᵀ`, accumulated in parallel over column blocks of `x`.
pub fn gram_rows(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let p = x.ncols();
    let block = 256;
    if p <= block {
        return x * x.transpose();
    }
    let starts: Vec<usize> = (0..p).step_by(block).collect();
    starts
        .par_iter()
        .map(|&s| {
            let c = x.columns(s, block.min(p - s));
            &c * c.transpose()
        })
        .reduce(|| DMatrix::zeros(n, n), |a, b| a + b)
}

/// `xᵀ * x`.
pub fn gram_cols(x: &DMatrix<f64>) -> DMatrix<f64> {
    par_mul(&x.transpose(), x)
}

/// Eigen-decomposition of a symmetric PSD matrix with eigenvalues sorted in
/// decreasing order and clamped at zero.
pub fn psd_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let (values, vectors) = if eig.eigenvalues.iter().chain(eig.eigenvectors.iter()).all(|v| v.is_finite()) {
        (eig.eigenvalues, eig.eigenvectors)
    } else {
        // the QR iteration can break down on exactly-zero rows; for a PSD
        // matrix the SVD gives the same pairs
        let svd = sym.svd(true, false);
        (svd.singular_values, svd.u.expect("u requested"))
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let vals = DVector::from_iterator(order.len(), order.iter().map(|&i| values[i].max(0.0)));
    let mut vecs = DMatrix::zeros(m.nrows(), order.len());
    for (j, &i) in order.iter().enumerate() {
        vecs.set_column(j, &vectors.column(i));
    }
    (vals, vecs)
}

/// Scale row `i` of `m` by `s[i]`.
pub fn scale_rows(m: &mut DMatrix<f64>, s: &[f64]) {
    assert_eq!(m.nrows(), s.len());
    for mut col in m.column_iter_mut() {
        for (v, f) in col.iter_mut().zip(s) {
            *v *= f;
        }
    }
}

/// Rows `idx` of `m`, in order.
pub fn select_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |r, c| m[(idx[r], c)])
}

/// Columns `idx` of `m`, in order.
pub fn select_columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), idx.len());
    for (j, &i) in idx.iter().enumerate() {
        out.set_column(j, &m.column(i));
    }
    out
}
