use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{StatsConfig, StatsError};
use crate::encoder::{r2_columns, FoldSpec};

const PERMUTATION_STREAM: u64 = 1 << 40;
const BOOTSTRAP_STREAM: u64 = 2 << 40;

/// Generator for resampling iteration `iter`. Every voxel sees the same draw.
fn iteration_rng(seed: u64, stream: u64, iter: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream + iter as u64);
    rng
}

/// Contiguous blocks of `block` rows within each fold; trailing short blocks
/// are kept.
pub fn fold_blocks(folds: &FoldSpec, block: usize) -> Result<Vec<Vec<std::ops::Range<usize>>>, StatsError> {
    assert!(block >= 1, "block size must be >= 1");
    folds
        .folds()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            if f.len() < block {
                return Err(StatsError::FoldShorterThanBlock { fold: i, len: f.len(), block });
            }
            Ok((f.start..f.end).step_by(block).map(|s| s..(s + block).min(f.end)).collect())
        })
        .collect()
}

/// A row permutation that shuffles block order within each fold.
pub fn block_permutation<R: Rng>(blocks: &[Vec<std::ops::Range<usize>>], rng: &mut R) -> Vec<usize> {
    let mut out = Vec::new();
    for fold in blocks {
        let mut order: Vec<usize> = (0..fold.len()).collect();
        order.shuffle(rng);
        for b in order {
            out.extend(fold[b].clone());
        }
    }
    out
}

fn check_aligned(pred: &DMatrix<f64>, actual: &DMatrix<f64>, folds: &FoldSpec) -> Result<(), StatsError> {
    if pred.shape() != actual.shape() || folds.n() != actual.nrows() {
        return Err(StatsError::ShapeMismatch {
            expected: actual.shape(),
            found: pred.shape(),
        });
    }
    Ok(())
}

/// Block permutation p-values for pooled held-out R².
///
/// Each iteration shuffles the order of prediction blocks within every fold
/// and recomputes the pooled R²; `p = (1 + #{R²_perm ≥ R²_obs}) / (1 + n)`.
pub fn block_permutation_test(
    pred: &DMatrix<f64>,
    actual: &DMatrix<f64>,
    folds: &FoldSpec,
    cfg: &StatsConfig,
) -> Result<Vec<f64>, StatsError> {
    check_aligned(pred, actual, folds)?;
    let blocks = fold_blocks(folds, cfg.block)?;
    let n_perm = cfg.n_permutations;
    let perms: Vec<Vec<u32>> = (0..n_perm)
        .map(|it| {
            let mut rng = iteration_rng(cfg.seed, PERMUTATION_STREAM, it);
            block_permutation(&blocks, &mut rng).into_iter().map(|i| i as u32).collect()
        })
        .collect();
    let n = actual.nrows() as f64;
    let p = (0..actual.ncols())
        .into_par_iter()
        .map(|v| {
            let y = actual.column(v);
            let yhat = pred.column(v);
            let mean = y.sum() / n;
            let ss_tot: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
            let syy: f64 = y.iter().map(|a| a * a).sum();
            let spp: f64 = yhat.iter().map(|a| a * a).sum();
            let r2 = |cross: f64| if ss_tot > 0.0 { 1.0 - (syy + spp - 2.0 * cross) / ss_tot } else { 0.0 };
            let obs = r2(y.dot(&yhat));
            let tol = 1e-12 * (1.0 + obs.abs());
            let hits = perms
                .iter()
                .filter(|perm| {
                    let cross: f64 = perm.iter().enumerate().map(|(t, &s)| y[t] * yhat[s as usize]).sum();
                    r2(cross) >= obs - tol
                })
                .count();
            (1 + hits) as f64 / (1 + n_perm) as f64
        })
        .collect();
    Ok(p)
}

/// Sums over one block that determine R² for both models.
#[derive(Clone, Copy, Default)]
struct BlockSums {
    n: f64,
    y: f64,
    yy: f64,
    ya: f64,
    aa: f64,
    yb: f64,
    bb: f64,
}

impl BlockSums {
    fn add(&mut self, o: &BlockSums, w: f64) {
        self.n += w * o.n;
        self.y += w * o.y;
        self.yy += w * o.yy;
        self.ya += w * o.ya;
        self.aa += w * o.aa;
        self.yb += w * o.yb;
        self.bb += w * o.bb;
    }

    fn r2_diff(&self) -> f64 {
        let ss_tot = self.yy - self.y * self.y / self.n;
        if ss_tot <= 1e-12 * self.yy.max(1e-300) {
            return 0.0;
        }
        let res_a = self.yy - 2.0 * self.ya + self.aa;
        let res_b = self.yy - 2.0 * self.yb + self.bb;
        (res_b - res_a) / ss_tot
    }
}

/// Draw how many times each block is picked: within each fold, as many draws
/// (with replacement) as the fold has blocks.
fn bootstrap_counts<R: Rng>(blocks: &[Vec<std::ops::Range<usize>>], rng: &mut R) -> Vec<f64> {
    let mut counts = Vec::new();
    for fold in blocks {
        let base = counts.len();
        counts.extend(std::iter::repeat_n(0.0, fold.len()));
        for _ in 0..fold.len() {
            counts[base + rng.random_range(0..fold.len())] += 1.0;
        }
    }
    counts
}

/// Bootstrap distribution of `R²_A − R²_B` (n_bootstrap × V). Each iteration
/// resamples blocks with replacement inside every fold, using the same
/// blocks for both predictions and the actual data.
pub fn bootstrap_distribution(
    pred_a: &DMatrix<f64>,
    pred_b: &DMatrix<f64>,
    actual: &DMatrix<f64>,
    folds: &FoldSpec,
    cfg: &StatsConfig,
) -> Result<DMatrix<f64>, StatsError> {
    check_aligned(pred_a, actual, folds)?;
    check_aligned(pred_b, actual, folds)?;
    let blocks = fold_blocks(folds, cfg.block)?;
    let flat: Vec<std::ops::Range<usize>> = blocks.iter().flatten().cloned().collect();
    let draws: Vec<Vec<f64>> = (0..cfg.n_bootstrap)
        .map(|it| bootstrap_counts(&blocks, &mut iteration_rng(cfg.seed, BOOTSTRAP_STREAM, it)))
        .collect();
    let v = actual.ncols();
    let cols: Vec<Vec<f64>> = (0..v)
        .into_par_iter()
        .map(|j| {
            let sums: Vec<BlockSums> = flat
                .iter()
                .map(|r| {
                    let mut s = BlockSums::default();
                    for t in r.clone() {
                        let (y, a, b) = (actual[(t, j)], pred_a[(t, j)], pred_b[(t, j)]);
                        s.n += 1.0;
                        s.y += y;
                        s.yy += y * y;
                        s.ya += y * a;
                        s.aa += a * a;
                        s.yb += y * b;
                        s.bb += b * b;
                    }
                    s
                })
                .collect();
            draws
                .iter()
                .map(|counts| {
                    let mut tot = BlockSums::default();
                    for (s, &c) in sums.iter().zip(counts) {
                        if c > 0.0 {
                            tot.add(s, c);
                        }
                    }
                    tot.r2_diff()
                })
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(cfg.n_bootstrap, v, |i, j| cols[j][i]))
}

/// One-sided block bootstrap test of `R²_A > R²_B` per voxel.
///
/// The bootstrap distribution is centered at the observed difference `d0`;
/// `p = (1 + #{d_b − d0 ≥ d0}) / (1 + n)`.
pub fn bootstrap_diff_test(
    pred_a: &DMatrix<f64>,
    pred_b: &DMatrix<f64>,
    actual: &DMatrix<f64>,
    folds: &FoldSpec,
    cfg: &StatsConfig,
) -> Result<Vec<f64>, StatsError> {
    let dist = bootstrap_distribution(pred_a, pred_b, actual, folds, cfg)?;
    let ra = r2_columns(actual, pred_a);
    let rb = r2_columns(actual, pred_b);
    let n = cfg.n_bootstrap;
    Ok((0..actual.ncols())
        .map(|j| {
            let d0 = ra[j] - rb[j];
            let tol = 1e-12 * (1.0 + d0.abs());
            let hits = dist.column(j).iter().filter(|&&d| d - d0 >= d0 - tol).count();
            (1 + hits) as f64 / (1 + n) as f64
        })
        .collect())
}
