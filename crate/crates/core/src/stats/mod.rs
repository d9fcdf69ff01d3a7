//! Significance testing: block permutation and block bootstrap tests over
//! held-out predictions, Benjamini–Hochberg FDR and ROI aggregation.

mod fdr;
mod resample;
mod roi;

pub use fdr::{bh_fdr, FdrResult};
pub use resample::{
    block_permutation, block_permutation_test, bootstrap_diff_test, bootstrap_distribution, fold_blocks,
};
pub use roi::{mean_se, roi_aggregate, RoiReport, RoiRow, RoiSummary, SubjectResult, ROI_CSV_HEADER};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("fold {fold} has {len} rows, shorter than block size {block}")]
    FoldShorterThanBlock { fold: usize, len: usize, block: usize },
    #[error("expected shape {expected:?}, found {found:?}")]
    ShapeMismatch { expected: (usize, usize), found: (usize, usize) },
    #[error("p-value {0} outside (0, 1]")]
    InvalidPValue(f64),
    #[error("subject {subject}: voxel {voxel} has no parcel label")]
    UnknownParcel { subject: String, voxel: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsConfig {
    /// Contiguous TRs per resampling block.
    pub block: usize,
    pub n_permutations: usize,
    pub n_bootstrap: usize,
    pub fdr_q: f64,
    pub seed: u64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self { block: 10, n_permutations: 5000, n_bootstrap: 5000, fdr_q: 0.05, seed: 0 }
    }
}

/// Per-voxel p-values with the FDR decision applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceMap {
    pub pvalues: Vec<f64>,
    pub reject: Vec<bool>,
    pub threshold: Option<f64>,
    pub q: f64,
}

impl SignificanceMap {
    /// Apply a threshold chosen elsewhere (e.g. from a pooled FDR run).
    pub fn with_threshold(pvalues: Vec<f64>, threshold: Option<f64>, q: f64) -> Self {
        let reject = pvalues.iter().map(|&p| threshold.is_some_and(|t| p <= t)).collect();
        Self { pvalues, reject, threshold, q }
    }

    pub fn n_rejected(&self) -> usize {
        self.reject.iter().filter(|&&r| r).count()
    }
}

/// Run one BH procedure over every map's p-values together and apply the
/// shared threshold to each map.
pub fn pooled_fdr(pvalue_sets: Vec<Vec<f64>>, q: f64) -> Result<Vec<SignificanceMap>, StatsError> {
    let flat: Vec<f64> = pvalue_sets.iter().flatten().copied().collect();
    let fdr = bh_fdr(&flat, q)?;
    Ok(pvalue_sets.into_iter().map(|p| SignificanceMap::with_threshold(p, fdr.threshold, q)).collect())
}

/// Fixed-precision rendering shared by every CSV, JSON and chart label.
pub fn format_value(x: f64) -> String {
    format!("{x:.6}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooled_threshold_is_shared() {
        let maps = pooled_fdr(vec![vec![0.01, 0.5], vec![0.02]], 0.05).unwrap();
        assert_eq!(maps[0].threshold, Some(0.02));
        assert_eq!(maps[0].reject, vec![true, false]);
        assert_eq!(maps[1].reject, vec![true]);
    }
}
