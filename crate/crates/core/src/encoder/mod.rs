//! Voxelwise ridge encoding models with nested λ selection and contiguous
//! K-fold cross-validation.

mod cv;
mod probe;
mod ridge;

pub use cv::{cross_validate, select_lambda, FoldSpec, RidgeConfig, VoxelScores};
pub use probe::{semantic_probe, ProbeConfig};
pub use ridge::{ridge_fit, ridge_objective, RidgeModel};

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EncoderError {
    #[error("regularized system is singular at lambda = {lambda}")]
    SingularSystem { lambda: f64 },
    #[error("lambda must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error("validation fraction must lie in (0, 1), got {0}")]
    InvalidValFraction(f64),
    #[error("fold {fold} has {len} rows, need at least {min}")]
    FoldTooSmall { fold: usize, len: usize, min: usize },
    #[error("design has {x} rows but targets have {y}")]
    RowMismatch { x: usize, y: usize },
    #[error("empty design")]
    Empty,
    #[error("non-finite value in design or targets")]
    NonFinite,
}

/// `1 − SS_res/SS_tot` with SS_tot around the column mean of `actual`.
/// Columns with zero variance score 0.
pub fn r2_score(actual: &[f64], predicted: &[f64]) -> f64 {
    assert_eq!(actual.len(), predicted.len());
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    let ss_res: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    if ss_tot <= f64::EPSILON * n * (1.0 + mean * mean) {
        return 0.0;
    }
    1.0 - ss_res / ss_tot
}

/// [`r2_score`] for every column.
pub fn r2_columns(actual: &DMatrix<f64>, predicted: &DMatrix<f64>) -> Vec<f64> {
    assert_eq!(actual.shape(), predicted.shape());
    actual
        .column_iter()
        .zip(predicted.column_iter())
        .map(|(a, p)| r2_score(a.as_slice(), p.as_slice()))
        .collect()
}
