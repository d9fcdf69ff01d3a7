//! Principal component reduction of ingested embeddings.

use nalgebra::{DMatrix, DVector};

use super::{FeatureError, FeatureMatrix, FeatureSpace};

/// Fitted projection: `scores = (x - mean) * components`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// D×k, orthonormal columns ordered by decreasing explained variance.
    pub components: DMatrix<f64>,
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        center(x, &self.mean) * &self.components
    }

    pub fn reconstruct(&self, scores: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = scores * self.components.transpose();
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        out
    }
}

fn center(x: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        row -= mean.transpose();
    }
    c
}

/// Reduce `x` to its leading principal components.
///
/// The output keeps `min(dim, rows - 1, numerical rank)` components; the
/// actual count is recorded under the `pca_dim` meta key. Each component's
/// largest-magnitude loading is made positive so results are reproducible.
pub fn pca_reduce(
    x: &FeatureMatrix,
    dim: usize,
    space: FeatureSpace,
) -> Result<(FeatureMatrix, PcaModel), FeatureError> {
    let values = x.values();
    let (n, d) = values.shape();
    if n < 2 {
        return Err(FeatureError::DegenerateInput);
    }
    let mean = values.row_mean().transpose();
    let centered = center(values, &mean);
    let svd = centered.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let s_max = order.first().map(|&i| sv[i]).unwrap_or(0.0);
    if s_max <= 0.0 {
        return Err(FeatureError::DegenerateInput);
    }
    let tol = s_max * (n.max(d) as f64) * f64::EPSILON * 16.0;
    let rank = order.iter().filter(|&&i| sv[i] > tol).count();
    let k = dim.min(n - 1).min(rank).max(1);
    let mut components = DMatrix::zeros(d, k);
    let mut explained_variance = Vec::with_capacity(k);
    for (j, &i) in order.iter().take(k).enumerate() {
        let mut col = v_t.row(i).transpose();
        let pivot = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            col.neg_mut();
        }
        components.set_column(j, &col);
        explained_variance.push(sv[i] * sv[i] / (n as f64 - 1.0));
    }
    let scores = &centered * &components;
    let model = PcaModel { mean, components, explained_variance };
    let out = FeatureMatrix::new(space, scores)?
        .with_meta("pca_dim_requested", dim)
        .with_meta("pca_dim", k)
        .with_meta("source_dim", d);
    Ok((out, model))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_two_input_keeps_two_components_and_reconstructs() {
        // rows are combinations of two fixed directions
        let a = [1.0, 2.0, 0.0, -1.0, 3.0];
        let b = [0.0, 1.0, 1.0, 1.0, -2.0];
        let coeffs = [(1.0, 0.0), (0.0, 1.0), (2.0, -1.0), (-1.0, 3.0), (0.5, 0.5), (3.0, 2.0), (-2.0, -1.0)];
        let x = DMatrix::from_fn(coeffs.len(), 5, |r, c| coeffs[r].0 * a[c] + coeffs[r].1 * b[c] + 0.25);
        let fm = FeatureMatrix::new(FeatureSpace::Ext("X".into()), x.clone()).unwrap();
        let (out, model) = pca_reduce(&fm, 250, FeatureSpace::SEM).unwrap();
        assert_eq!(out.dim(), 2);
        assert_eq!(out.meta["pca_dim"], serde_json::json!(2));
        let rec = model.reconstruct(out.values());
        assert!((rec - x).abs().max() < 1e-8);
        let gram = model.components.transpose() * &model.components;
        assert!((gram - DMatrix::identity(2, 2)).abs().max() < 1e-8);
        assert!(model.explained_variance[0] >= model.explained_variance[1]);
    }

    #[test]
    fn constant_input_is_degenerate() {
        let fm = FeatureMatrix::new(FeatureSpace::SEM, DMatrix::from_element(4, 3, 2.0)).unwrap();
        assert_eq!(pca_reduce(&fm, 2, FeatureSpace::SEM).unwrap_err(), FeatureError::DegenerateInput);
    }

    #[test]
    fn fewer_rows_than_dim() {
        let x = DMatrix::from_fn(4, 6, |r, c| ((r * 7 + c * 3) % 5) as f64 + (r * c) as f64 * 0.1);
        let fm = FeatureMatrix::new(FeatureSpace::SEM, x).unwrap();
        let (out, _) = pca_reduce(&fm, 250, FeatureSpace::SEM).unwrap();
        assert!(out.dim() <= 3);
    }
}
