use nalgebra::DMatrix;

use super::EncoderError;
use crate::linalg::{gram_cols, gram_rows, par_mul, psd_eigen, scale_rows};
use crate::signal::ZScore;

/// Fitted ridge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    /// D×V weights.
    pub weights: DMatrix<f64>,
    /// Regularization used for each voxel.
    pub lambdas: Vec<f64>,
    /// Per-voxel offset added to predictions (training mean of Y), if fitted.
    pub intercept: Option<Vec<f64>>,
    /// Column statistics applied to X before multiplying by the weights.
    pub x_stats: Option<ZScore>,
}

impl RidgeModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let x = match &self.x_stats {
            Some(z) => z.apply(x),
            None => x.clone(),
        };
        let mut y = par_mul(&x, &self.weights);
        if let Some(b) = &self.intercept {
            for (mut col, b) in y.column_iter_mut().zip(b) {
                col.add_scalar_mut(*b);
            }
        }
        y
    }
}

/// `W = (XᵀX + λI)⁻¹ XᵀY` by Cholesky of whichever Gram matrix is smaller
/// (`XᵀX + λI`, or `XXᵀ + λI` with `W = Xᵀ(XXᵀ + λI)⁻¹Y`).
pub fn ridge_fit(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<RidgeModel, EncoderError> {
    check_shapes(x, y)?;
    let (n, d) = x.shape();
    let weights = if d <= n {
        let mut g = gram_cols(x);
        for i in 0..d {
            g[(i, i)] += lambda;
        }
        let chol = g.cholesky().ok_or(EncoderError::SingularSystem { lambda })?;
        chol.solve(&par_mul(&x.transpose(), y))
    } else {
        let mut k = gram_rows(x);
        for i in 0..n {
            k[(i, i)] += lambda;
        }
        let chol = k.cholesky().ok_or(EncoderError::SingularSystem { lambda })?;
        par_mul(&x.transpose(), &chol.solve(y))
    };
    if weights.iter().any(|v| !v.is_finite()) {
        return Err(EncoderError::SingularSystem { lambda });
    }
    Ok(RidgeModel { weights, lambdas: vec![lambda; y.ncols()], intercept: None, x_stats: None })
}

/// The ridge objective `‖Y − XW‖²_F + λ‖W‖²_F`.
pub fn ridge_objective(x: &DMatrix<f64>, y: &DMatrix<f64>, w: &DMatrix<f64>, lambda: f64) -> f64 {
    (y - x * w).norm_squared() + lambda * w.norm_squared()
}

pub(crate) fn check_shapes(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<(), EncoderError> {
    if x.nrows() != y.nrows() {
        return Err(EncoderError::RowMismatch { x: x.nrows(), y: y.nrows() });
    }
    if x.nrows() == 0 {
        return Err(EncoderError::Empty);
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(EncoderError::NonFinite);
    }
    Ok(())
}

/// Ridge solutions for every λ from one eigen-decomposition of the smaller
/// Gram matrix: `W(λ) = B · diag(1/(e+λ)) · Mᵀ Y`.
pub(crate) struct SpectralRidge {
    /// D×k.
    basis: DMatrix<f64>,
    /// n×k; projects training targets.
    proj: DMatrix<f64>,
    evals: Vec<f64>,
}

impl SpectralRidge {
    pub fn new(x: &DMatrix<f64>) -> Self {
        let (n, d) = x.shape();
        if d <= n {
            let (e, q) = psd_eigen(&gram_cols(x));
            let proj = par_mul(x, &q);
            Self { basis: q, proj, evals: e.iter().copied().collect() }
        } else {
            let (e, u) = psd_eigen(&gram_rows(x));
            let basis = par_mul(&x.transpose(), &u);
            Self { basis, proj: u, evals: e.iter().copied().collect() }
        }
    }

    /// `Mᵀ Y` (k×V), shared by every λ.
    pub fn project(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        par_mul(&self.proj.transpose(), y)
    }

    /// `X' B` for new rows; predictions are `transform · diag · projected`.
    pub fn transform(&self, x_new: &DMatrix<f64>) -> DMatrix<f64> {
        par_mul(x_new, &self.basis)
    }

    fn shrink(&self, lambda: f64) -> Vec<f64> {
        self.evals.iter().map(|e| 1.0 / (e + lambda)).collect()
    }

    /// Predictions `T · diag(1/(e+λ)) · C` for the given projected targets.
    pub fn predict(&self, transformed: &DMatrix<f64>, projected: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
        let mut c = projected.clone();
        scale_rows(&mut c, &self.shrink(lambda));
        par_mul(transformed, &c)
    }

    #[cfg(test)]
    pub fn weights(&self, projected: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
        let mut c = projected.clone();
        scale_rows(&mut c, &self.shrink(lambda));
        par_mul(&self.basis, &c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_x() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            6,
            3,
            &[1.0, 2.0, 0.5, -1.0, 0.0, 2.0, 0.5, 1.5, -1.0, 2.0, -1.0, 0.0, 0.0, 1.0, 1.0, 1.5, 0.5, -0.5],
        )
    }

    fn fixture_y() -> DMatrix<f64> {
        DMatrix::from_row_slice(6, 2, &[1.0, 0.0, 2.0, -1.0, 0.5, 0.5, -1.0, 2.0, 0.0, 1.0, 1.0, 1.0])
    }

    /// Inverse of a 3×3 matrix by cofactors.
    fn inv3(m: &DMatrix<f64>) -> DMatrix<f64> {
        let a = |r: usize, c: usize| m[(r, c)];
        let det = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
            + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
        let cof = DMatrix::from_fn(3, 3, |r, c| {
            let rows: Vec<usize> = (0..3).filter(|&i| i != r).collect();
            let cols: Vec<usize> = (0..3).filter(|&j| j != c).collect();
            let minor = a(rows[0], cols[0]) * a(rows[1], cols[1]) - a(rows[0], cols[1]) * a(rows[1], cols[0]);
            if (r + c) % 2 == 0 {
                minor
            } else {
                -minor
            }
        });
        cof.transpose() / det
    }

    #[test]
    fn matches_explicit_normal_equations() {
        let (x, y) = (fixture_x(), fixture_y());
        for lambda in [1e-3, 0.1, 1.0, 10.0] {
            let g = x.transpose() * &x + DMatrix::identity(3, 3) * lambda;
            let want = inv3(&g) * x.transpose() * &y;
            let got = ridge_fit(&x, &y, lambda).unwrap().weights;
            assert!((got - want).amax() < 1e-8);
        }
    }

    #[test]
    fn dual_form_agrees_with_primal() {
        let x = DMatrix::from_fn(5, 12, |r, c| ((r * 7 + c * 5) % 11) as f64 * 0.3 - 1.0);
        let y = DMatrix::from_fn(5, 3, |r, c| (r as f64 - c as f64).sin());
        let lambda = 0.7;
        let dual = ridge_fit(&x, &y, lambda).unwrap().weights;
        let primal = (x.transpose() * &x + DMatrix::identity(12, 12) * lambda).cholesky().unwrap().solve(&(x.transpose() * &y));
        assert!((dual - primal).amax() < 1e-9);
    }

    #[test]
    fn identity_design_and_shrinkage_limit() {
        let x = DMatrix::identity(4, 4);
        let y = DMatrix::from_fn(4, 2, |r, c| (r + 2 * c) as f64);
        let w = ridge_fit(&x, &y, 1e-12).unwrap().weights;
        assert!((w - &y).amax() < 1e-9);
        let w = ridge_fit(&x, &y, 1e12).unwrap().weights;
        assert!(w.amax() < 1e-6);
    }

    #[test]
    fn stationarity() {
        let (x, y) = (fixture_x(), fixture_y());
        let lambda = 0.3;
        let w = ridge_fit(&x, &y, lambda).unwrap().weights;
        let grad = x.transpose() * (&x * &w - &y) + &w * lambda;
        assert!(grad.amax() < 1e-10);
    }

    #[test]
    fn spectral_agrees_with_cholesky() {
        for (n, d) in [(6, 3), (5, 12)] {
            let x = DMatrix::from_fn(n, d, |r, c| ((r * 3 + c * 7) % 5) as f64 - 2.0 + 0.1 * c as f64);
            let y = DMatrix::from_fn(n, 2, |r, c| (r * c) as f64 * 0.5 - 1.0);
            let s = SpectralRidge::new(&x);
            let proj = s.project(&y);
            for lambda in [1e-2, 1.0] {
                let w = ridge_fit(&x, &y, lambda).unwrap().weights;
                assert!((s.weights(&proj, lambda) - &w).amax() < 1e-8);
                assert!((s.predict(&s.transform(&x), &proj, lambda) - &x * &w).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_shape_mismatch() {
        let x = DMatrix::zeros(3, 2);
        let y = DMatrix::zeros(4, 1);
        assert_eq!(ridge_fit(&x, &y, 1.0).unwrap_err(), EncoderError::RowMismatch { x: 3, y: 4 });
    }
}
