use std::ops::Range;

use nalgebra::DMatrix;

use super::ridge::{check_shapes, SpectralRidge};
use super::{r2_columns, EncoderError};
use crate::linalg::{select_columns, select_rows};
use crate::signal::ZScore;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeConfig {
    /// Candidate regularization weights, all > 0.
    pub lambdas: Vec<f64>,
    /// Fraction of the training rows (contiguous tail) held out to pick λ.
    pub val_fraction: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self { lambdas: vec![1e-3, 1e-2, 1e-1], val_fraction: 0.2 }
    }
}

impl RidgeConfig {
    /// Validated, sorted and deduplicated λ grid.
    pub fn grid(&self) -> Result<Vec<f64>, EncoderError> {
        if self.lambdas.is_empty() {
            return Err(EncoderError::InvalidLambda(f64::NAN));
        }
        if let Some(&bad) = self.lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(EncoderError::InvalidLambda(bad));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(EncoderError::InvalidValFraction(self.val_fraction));
        }
        let mut g = self.lambdas.clone();
        g.sort_by(f64::total_cmp);
        g.dedup();
        Ok(g)
    }
}

/// Contiguous folds partitioning `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSpec {
    folds: Vec<Range<usize>>,
}

impl FoldSpec {
    /// `k` contiguous folds; the first `n % k` folds get one extra row. Every
    /// fold must hold at least `min_len` rows.
    pub fn contiguous(n: usize, k: usize, min_len: usize) -> Result<Self, EncoderError> {
        if k < 2 {
            return Err(EncoderError::FoldTooSmall { fold: 0, len: n, min: min_len });
        }
        let base = n / k;
        let extra = n % k;
        let mut folds = Vec::with_capacity(k);
        let mut start = 0;
        for i in 0..k {
            let len = base + usize::from(i < extra);
            if len < min_len.max(1) {
                return Err(EncoderError::FoldTooSmall { fold: i, len, min: min_len.max(1) });
            }
            folds.push(start..start + len);
            start += len;
        }
        Ok(Self { folds })
    }

    pub fn from_ranges(folds: Vec<Range<usize>>) -> Result<Self, EncoderError> {
        let mut expect = 0;
        for (i, f) in folds.iter().enumerate() {
            if f.start != expect || f.is_empty() {
                return Err(EncoderError::FoldTooSmall { fold: i, len: f.len(), min: 1 });
            }
            expect = f.end;
        }
        Ok(Self { folds })
    }

    pub fn folds(&self) -> &[Range<usize>] {
        &self.folds
    }

    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn n(&self) -> usize {
        self.folds.last().map_or(0, |f| f.end)
    }

    /// Rows outside fold `i`, in time order.
    pub fn train_rows(&self, i: usize) -> Vec<usize> {
        let test = &self.folds[i];
        (0..self.n()).filter(|r| !test.contains(r)).collect()
    }
}

/// Per-voxel λ maximizing validation R² on the contiguous tail of the
/// training rows. Ties go to the larger λ. Both X and Y are centered on the
/// fitting rows.
pub fn select_lambda(x_train: &DMatrix<f64>, y_train: &DMatrix<f64>, cfg: &RidgeConfig) -> Result<Vec<f64>, EncoderError> {
    check_shapes(x_train, y_train)?;
    let grid = cfg.grid()?;
    let n = x_train.nrows();
    let n_val = ((n as f64 * cfg.val_fraction).round() as usize).max(1);
    if n_val + 1 > n {
        return Err(EncoderError::FoldTooSmall { fold: 0, len: n, min: 2 });
    }
    let n_fit = n - n_val;
    let (x_fit, x_mean) = center(&x_train.rows(0, n_fit).into_owned());
    let mut x_val = x_train.rows(n_fit, n_val).into_owned();
    add_intercept(&mut x_val, &x_mean.iter().map(|m| -m).collect::<Vec<_>>());
    let (y_fit, mean) = center(&y_train.rows(0, n_fit).into_owned());
    let y_val = y_train.rows(n_fit, n_val).into_owned();
    let solver = SpectralRidge::new(&x_fit);
    let proj = solver.project(&y_fit);
    let t = solver.transform(&x_val);
    let v = y_train.ncols();
    let mut best = vec![f64::NEG_INFINITY; v];
    let mut chosen = vec![grid[0]; v];
    for &lambda in &grid {
        let mut pred = solver.predict(&t, &proj, lambda);
        add_intercept(&mut pred, &mean);
        let r2 = r2_columns(&y_val, &pred);
        for j in 0..v {
            if r2[j] >= best[j] - 1e-12 * best[j].abs().max(1e-300) {
                best[j] = r2[j].max(best[j]);
                chosen[j] = lambda;
            }
        }
    }
    Ok(chosen)
}

pub(crate) fn center(y: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let n = y.nrows() as f64;
    let mean: Vec<f64> = y.column_iter().map(|c| c.sum() / n).collect();
    let mut out = y.clone();
    for (mut col, m) in out.column_iter_mut().zip(&mean) {
        col.add_scalar_mut(-m);
    }
    (out, mean)
}

pub(crate) fn add_intercept(y: &mut DMatrix<f64>, mean: &[f64]) {
    for (mut col, m) in y.column_iter_mut().zip(mean) {
        col.add_scalar_mut(*m);
    }
}

/// Cross-validated encoding scores for every voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelScores {
    pub folds: FoldSpec,
    /// K×V held-out R² per fold.
    pub fold_r2: DMatrix<f64>,
    /// R² over all held-out predictions against the run mean.
    pub pooled_r2: Vec<f64>,
    /// n×V held-out predictions; row `t` comes from the fold containing `t`.
    pub predictions: DMatrix<f64>,
    /// K×V chosen λ.
    pub lambdas: DMatrix<f64>,
}

impl VoxelScores {
    pub fn n_voxels(&self) -> usize {
        self.pooled_r2.len()
    }

    /// Mean over folds of the per-fold R².
    pub fn mean_fold_r2(&self) -> Vec<f64> {
        self.fold_r2.column_iter().map(|c| c.mean()).collect()
    }

    /// Count of each λ value across folds and voxels.
    pub fn lambda_histogram(&self) -> Vec<(f64, usize)> {
        let mut vals: Vec<f64> = self.lambdas.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        let mut out: Vec<(f64, usize)> = Vec::new();
        for v in vals {
            match out.last_mut() {
                Some((l, c)) if *l == v => *c += 1,
                _ => out.push((v, 1)),
            }
        }
        out
    }
}

/// K-fold ridge encoding: per fold, z-score X with training statistics,
/// center Y on the training mean, choose λ per voxel on the training tail,
/// refit on the whole training fold and predict the held-out fold.
pub fn cross_validate(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    folds: &FoldSpec,
    cfg: &RidgeConfig,
) -> Result<VoxelScores, EncoderError> {
    check_shapes(x, y)?;
    if folds.n() != x.nrows() {
        return Err(EncoderError::RowMismatch { x: x.nrows(), y: folds.n() });
    }
    let grid = cfg.grid()?;
    let (n, v) = y.shape();
    let k = folds.k();
    let mut predictions = DMatrix::zeros(n, v);
    let mut fold_r2 = DMatrix::zeros(k, v);
    let mut lambdas = DMatrix::zeros(k, v);
    for (i, test) in folds.folds().iter().enumerate() {
        let train_idx = folds.train_rows(i);
        let x_train_raw = select_rows(x, &train_idx);
        let z = ZScore::fit(&x_train_raw);
        // flat columns pass through z-scoring; centering removes them
        let (x_train, x_mean) = center(&z.apply(&x_train_raw));
        let mut x_test = z.apply(&x.rows(test.start, test.len()).into_owned());
        add_intercept(&mut x_test, &x_mean.iter().map(|m| -m).collect::<Vec<_>>());
        let y_train = select_rows(y, &train_idx);
        let y_test = y.rows(test.start, test.len()).into_owned();

        let chosen = select_lambda(&x_train, &y_train, cfg)?;
        let (y_c, mean) = center(&y_train);
        let solver = SpectralRidge::new(&x_train);
        let t = solver.transform(&x_test);
        let mut pred = DMatrix::zeros(test.len(), v);
        for &lambda in &grid {
            let cols: Vec<usize> = (0..v).filter(|&j| chosen[j] == lambda).collect();
            if cols.is_empty() {
                continue;
            }
            let proj = solver.project(&select_columns(&y_c, &cols));
            let p = solver.predict(&t, &proj, lambda);
            for (jj, &j) in cols.iter().enumerate() {
                pred.set_column(j, &p.column(jj));
            }
        }
        add_intercept(&mut pred, &mean);
        let r2 = r2_columns(&y_test, &pred);
        for j in 0..v {
            fold_r2[(i, j)] = r2[j];
            lambdas[(i, j)] = chosen[j];
        }
        predictions.rows_mut(test.start, test.len()).copy_from(&pred);
    }
    let pooled_r2 = r2_columns(y, &predictions);
    Ok(VoxelScores { folds: folds.clone(), fold_r2, pooled_r2, predictions, lambdas })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn folds_partition() {
        let f = FoldSpec::contiguous(282, 4, 20).unwrap();
        assert_eq!(f.folds(), &[0..71, 71..142, 142..212, 212..282]);
        assert_eq!(f.train_rows(1).len(), 211);
        assert!(matches!(FoldSpec::contiguous(30, 4, 20), Err(EncoderError::FoldTooSmall { .. })));
    }

    #[test]
    fn noiseless_data_picks_smallest_lambda() {
        let x = noise(80, 5, 1);
        let w = noise(5, 4, 2);
        let y = &x * &w;
        let cfg = RidgeConfig { lambdas: vec![1e-3, 1.0, 10.0, 1.0], val_fraction: 0.2 };
        let chosen = select_lambda(&x, &y, &cfg).unwrap();
        assert!(chosen.iter().all(|&l| l == 1e-3));
    }

    #[test]
    fn noise_voxel_gets_grid_member() {
        let x = noise(60, 4, 3);
        let y = noise(60, 3, 4);
        let cfg = RidgeConfig::default();
        let chosen = select_lambda(&x, &y, &cfg).unwrap();
        assert!(chosen.iter().all(|l| cfg.lambdas.contains(l)));
    }

    #[test]
    fn constant_voxel_ties_go_to_largest_lambda() {
        let x = noise(40, 3, 5);
        let y = DMatrix::from_element(40, 1, 2.0);
        let chosen = select_lambda(&x, &y, &RidgeConfig::default()).unwrap();
        assert_eq!(chosen, vec![1e-1]);
    }

    #[test]
    fn cross_validation_recovers_linear_signal() {
        let x = noise(200, 6, 6);
        let w = noise(6, 3, 7);
        let mut y = &x * &w;
        y += noise(200, 3, 8) * 0.01;
        let folds = FoldSpec::contiguous(200, 4, 20).unwrap();
        let s = cross_validate(&x, &y, &folds, &RidgeConfig::default()).unwrap();
        assert!(s.pooled_r2.iter().all(|&r| r > 0.99));
        assert_eq!(s.predictions.shape(), (200, 3));
        assert_eq!(s.lambda_histogram().iter().map(|h| h.1).sum::<usize>(), 12);
    }

    #[test]
    fn held_out_rows_do_not_affect_fold_model() {
        let x = noise(100, 4, 9);
        let y = noise(100, 2, 10);
        let folds = FoldSpec::contiguous(100, 4, 10).unwrap();
        let a = cross_validate(&x, &y, &folds, &RidgeConfig::default()).unwrap();
        let mut y2 = y.clone();
        // scramble fold 0's targets; fold 0 predictions must not change
        for r in 0..25 {
            y2.set_row(r, &y.row(24 - r));
        }
        let b = cross_validate(&x, &y2, &folds, &RidgeConfig::default()).unwrap();
        assert!((a.predictions.rows(0, 25) - b.predictions.rows(0, 25)).amax() < 1e-10);
    }

    #[test]
    fn deterministic() {
        let x = noise(90, 30, 11);
        let y = noise(90, 5, 12);
        let folds = FoldSpec::contiguous(90, 3, 10).unwrap();
        let a = cross_validate(&x, &y, &folds, &RidgeConfig::default()).unwrap();
        let b = cross_validate(&x, &y, &folds, &RidgeConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
