//! Cross-validated ridge encoding of synthetic voxels.

use nalgebra::DMatrix;
use parsebrain::encoder::{cross_validate, FoldSpec, RidgeConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut normal = |r, c| DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
    let x: DMatrix<f64> = normal(282, 12);
    let w = normal(12, 5);
    let noise = normal(282, 5);
    // voxel j has noise scaled by j
    let y = DMatrix::from_fn(282, 5, |i, j| (&x * &w)[(i, j)] + j as f64 * 2.0 * noise[(i, j)]);

    let folds = FoldSpec::contiguous(282, 4, 10)?;
    let scores = cross_validate(&x, &y, &folds, &RidgeConfig::default())?;
    for (j, r2) in scores.pooled_r2.iter().enumerate() {
        println!("voxel {j}: pooled R2 {r2:.3}");
    }
    println!("lambda use: {:?}", scores.lambda_histogram());
    Ok(())
}
