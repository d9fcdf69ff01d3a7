use nalgebra::DMatrix;

use super::cv::{cross_validate, FoldSpec, RidgeConfig};
use super::EncoderError;

/// Word-level probe predicting semantic targets from a feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub folds: usize,
    pub ridge: RidgeConfig,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { folds: 10, ridge: RidgeConfig { lambdas: vec![0.1, 1.0, 10.0, 100.0, 1000.0], val_fraction: 0.2 } }
    }
}

/// Mean held-out R² over target dimensions and folds.
pub fn semantic_probe(features: &DMatrix<f64>, targets: &DMatrix<f64>, cfg: &ProbeConfig) -> Result<f64, EncoderError> {
    let folds = FoldSpec::contiguous(features.nrows(), cfg.folds, 2)?;
    let scores = cross_validate(features, targets, &folds, &cfg.ridge)?;
    Ok(scores.fold_r2.mean())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn self_prediction() {
        let x = gaussian(1000, 300, 1);
        assert!(semantic_probe(&x, &x, &ProbeConfig::default()).unwrap() > 0.99);
    }

    #[test]
    fn independent_noise() {
        let x = gaussian(1000, 20, 2);
        let y = gaussian(1000, 30, 3);
        assert!(semantic_probe(&x, &y, &ProbeConfig::default()).unwrap() <= 0.05);
    }
}
