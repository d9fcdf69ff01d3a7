//! Word-rate to TR-rate alignment: Lanczos resampling, within-TR averaging,
//! FIR delay expansion and column z-scoring.
//!
//! TR `r` covers `[r·TR, (r+1)·TR)` and is centered at `(r + 0.5)·TR`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::features::{FeatureMatrix, FeatureSpace};
use crate::treebank::StimulusCorpus;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("corpus has no word timings")]
    NoTimings,
    #[error("{rows} feature rows but {tokens} timed tokens")]
    RowMismatch { rows: usize, tokens: usize },
    #[error("invalid signal configuration: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMode {
    Lanczos,
    ChunkAverage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResampleConfig {
    pub lobes: usize,
    pub tr: f64,
    pub mode: ResampleMode,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        Self { lobes: 3, tr: 1.5, mode: ResampleMode::Lanczos }
    }
}

impl ResampleConfig {
    pub fn validate(&self) -> Result<(), SignalError> {
        if self.lobes < 1 {
            return Err(SignalError::BadConfig("lobes must be >= 1".into()));
        }
        if !(self.tr > 0.0 && self.tr.is_finite()) {
            return Err(SignalError::BadConfig(format!("TR must be positive, got {}", self.tr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirConfig {
    pub n_delays: usize,
}

impl Default for FirConfig {
    fn default() -> Self {
        Self { n_delays: 8 }
    }
}

impl FirConfig {
    /// Span of the delays in seconds.
    pub fn window_sec(&self, tr: f64) -> f64 {
        self.n_delays as f64 * tr
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Lanczos kernel `sinc(t)·sinc(t/a)` on `|t| < a`, zero elsewhere.
pub fn lanczos_weight(t: f64, a: usize) -> f64 {
    assert!(a >= 1, "lanczos lobes must be >= 1");
    let a = a as f64;
    if t.abs() >= a {
        return 0.0;
    }
    if t.fract() == 0.0 {
        return if t == 0.0 { 1.0 } else { 0.0 };
    }
    sinc(t) * sinc(t / a)
}

/// Center time of TR `r`.
pub fn tr_center(r: usize, tr: f64) -> f64 {
    (r as f64 + 0.5) * tr
}

/// Resample word rows onto `n_tr` TRs from explicit, non-decreasing onsets (seconds).
pub fn resample_rows(x: &DMatrix<f64>, onsets: &[f64], cfg: &ResampleConfig, n_tr: usize) -> DMatrix<f64> {
    assert_eq!(x.nrows(), onsets.len(), "one onset per row");
    let d = x.ncols();
    let mut out = DMatrix::zeros(n_tr, d);
    match cfg.mode {
        ResampleMode::Lanczos => {
            let reach = cfg.lobes as f64 * cfg.tr;
            for r in 0..n_tr {
                let t_r = tr_center(r, cfg.tr);
                let lo = onsets.partition_point(|&o| o <= t_r - reach);
                let mut wsum = 0.0;
                let mut acc = DVector::zeros(d);
                for (k, &o) in onsets.iter().enumerate().skip(lo) {
                    if o >= t_r + reach {
                        break;
                    }
                    let w = lanczos_weight((t_r - o) / cfg.tr, cfg.lobes);
                    if w != 0.0 {
                        wsum += w;
                        acc.axpy(w, &x.row(k).transpose(), 1.0);
                    }
                }
                if wsum.abs() >= 1e-8 {
                    out.set_row(r, &(acc / wsum).transpose());
                }
            }
        }
        ResampleMode::ChunkAverage => {
            let mut counts = vec![0usize; n_tr];
            for (k, &o) in onsets.iter().enumerate() {
                let r = (o / cfg.tr).floor();
                if r < 0.0 || r as usize >= n_tr {
                    continue;
                }
                let r = r as usize;
                counts[r] += 1;
                let mut row = out.row_mut(r);
                row += x.row(k);
            }
            for (r, &c) in counts.iter().enumerate() {
                if c > 0 {
                    let mut row = out.row_mut(r);
                    row /= c as f64;
                }
            }
        }
    }
    out
}

/// Resample a word-level feature matrix to TR rate using the corpus onsets.
pub fn resample_to_tr(
    features: &FeatureMatrix,
    corpus: &StimulusCorpus,
    cfg: &ResampleConfig,
    n_tr: usize,
) -> Result<DMatrix<f64>, SignalError> {
    cfg.validate()?;
    if !corpus.is_timed() {
        return Err(SignalError::NoTimings);
    }
    let onsets = corpus.onsets();
    if features.rows() != onsets.len() {
        return Err(SignalError::RowMismatch { rows: features.rows(), tokens: onsets.len() });
    }
    Ok(resample_rows(features.values(), &onsets, cfg, n_tr))
}

/// `out[r] = [x[r-1], x[r-2], ..., x[r-n]]`, with zeros before the run start.
pub fn fir_expand(x: &DMatrix<f64>, cfg: &FirConfig) -> DMatrix<f64> {
    let (n, d) = x.shape();
    let mut out = DMatrix::zeros(n, d * cfg.n_delays);
    for j in 0..cfg.n_delays {
        let delay = j + 1;
        if delay >= n {
            break;
        }
        out.view_mut((delay, j * d), (n - delay, d)).copy_from(&x.view((0, 0), (n - delay, d)));
    }
    out
}

/// Column means and population standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScore {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ZScore {
    pub fn fit(train: &DMatrix<f64>) -> Self {
        assert!(train.nrows() >= 2, "z-scoring needs at least two rows");
        let n = train.nrows() as f64;
        let mut mean = Vec::with_capacity(train.ncols());
        let mut std = Vec::with_capacity(train.ncols());
        let mut flat = 0;
        for col in train.column_iter() {
            let m = col.sum() / n;
            let v = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            let s = v.sqrt();
            if s <= 1e-12 * (1.0 + m.abs()) {
                flat += 1;
            }
            mean.push(m);
            std.push(s);
        }
        if flat > 0 {
            log::warn!("{flat} zero-variance column(s) left unscaled");
        }
        Self { mean, std }
    }

    fn is_flat(&self, c: usize) -> bool {
        self.std[c] <= 1e-12 * (1.0 + self.mean[c].abs())
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        self.apply_in_place(&mut out);
        out
    }

    pub fn apply_in_place(&self, x: &mut DMatrix<f64>) {
        assert_eq!(x.ncols(), self.mean.len());
        for (c, mut col) in x.column_iter_mut().enumerate() {
            if self.is_flat(c) {
                continue;
            }
            let (m, s) = (self.mean[c], self.std[c]);
            col.apply(|v| *v = (*v - m) / s);
        }
    }
}

/// Standardize `apply_to` with the column statistics of `train`.
pub fn zscore_columns(train: &DMatrix<f64>, apply_to: &DMatrix<f64>) -> DMatrix<f64> {
    ZScore::fit(train).apply(apply_to)
}

/// A TR-rate, delay-expanded design matrix for one feature space or group.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDesign {
    pub matrix: DMatrix<f64>,
    pub source: Vec<FeatureSpace>,
    pub n_delays: usize,
    /// Statistics from the most recent fold-local standardization, if any.
    pub zscore: Option<ZScore>,
}

impl AlignedDesign {
    pub fn n_tr(&self) -> usize {
        self.matrix.nrows()
    }

    /// Column-concatenate designs that share a TR count.
    pub fn concat(parts: &[AlignedDesign]) -> Result<AlignedDesign, SignalError> {
        let first = parts.first().ok_or_else(|| SignalError::BadConfig("no designs to concatenate".into()))?;
        let n = first.n_tr();
        if let Some(p) = parts.iter().find(|p| p.n_tr() != n) {
            return Err(SignalError::BadConfig(format!("TR counts differ: {} vs {}", n, p.n_tr())));
        }
        let cols: usize = parts.iter().map(|p| p.matrix.ncols()).sum();
        let mut m = DMatrix::zeros(n, cols);
        let mut off = 0;
        for p in parts {
            m.view_mut((0, off), (n, p.matrix.ncols())).copy_from(&p.matrix);
            off += p.matrix.ncols();
        }
        Ok(AlignedDesign {
            matrix: m,
            source: parts.iter().flat_map(|p| p.source.clone()).collect(),
            n_delays: first.n_delays,
            zscore: None,
        })
    }
}

/// Resample then delay-expand one feature space.
pub fn align(
    features: &FeatureMatrix,
    corpus: &StimulusCorpus,
    resample: &ResampleConfig,
    fir: &FirConfig,
    n_tr: usize,
) -> Result<AlignedDesign, SignalError> {
    let tr = resample_to_tr(features, corpus, resample, n_tr)?;
    Ok(AlignedDesign {
        matrix: fir_expand(&tr, fir),
        source: vec![features.space().clone()],
        n_delays: fir.n_delays,
        zscore: None,
    })
}
