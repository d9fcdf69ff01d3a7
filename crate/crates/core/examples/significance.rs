//! Block permutation and bootstrap tests with Benjamini-Hochberg.

use nalgebra::DMatrix;
use parsebrain::encoder::{cross_validate, FoldSpec, RidgeConfig};
use parsebrain::stats::{block_permutation_test, bh_fdr, bootstrap_diff_test, StatsConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 282;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut normal = |r, c| DMatrix::<f64>::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
    let xa = normal(n, 4);
    let xb = normal(n, 4);
    let noise = normal(n, 20);
    // first 10 voxels follow xb, the rest are noise
    let y = DMatrix::from_fn(n, 20, |i, j| if j < 10 { xb.row(i).sum() } else { 0.0 } + noise[(i, j)]);

    let folds = FoldSpec::contiguous(n, 4, 10)?;
    let ridge = RidgeConfig::default();
    let ab = nalgebra::DMatrix::from_fn(n, 8, |i, j| if j < 4 { xa[(i, j)] } else { xb[(i, j - 4)] });
    let a = cross_validate(&xa, &y, &folds, &ridge)?;
    let both = cross_validate(&ab, &y, &folds, &ridge)?;

    let cfg = StatsConfig { n_permutations: 999, n_bootstrap: 999, ..StatsConfig::default() };
    let p_perm = block_permutation_test(&both.predictions, &y, &folds, &cfg)?;
    let p_diff = bootstrap_diff_test(&both.predictions, &a.predictions, &y, &folds, &cfg)?;
    let fdr = bh_fdr(&p_diff, cfg.fdr_q)?;
    for j in 0..20 {
        println!("voxel {j:>2}: perm p {:.3}  A+B over A p {:.3}  {}", p_perm[j], p_diff[j], if fdr.reject[j] { "*" } else { "" });
    }
    println!("{} of 20 voxels significant after FDR (threshold {:?})", fdr.n_rejected(), fdr.threshold);
    Ok(())
}
