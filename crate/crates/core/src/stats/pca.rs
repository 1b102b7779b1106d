use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{sample_std, FeatureMatrix};

/// Principal axes of the z-scored active features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    /// Sample standard deviation per feature (1 for constant features).
    pub scale: Vec<f64>,
    /// k × d, orthonormal rows, sorted by decreasing eigenvalue.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    /// Every non-zero eigenvalue, retained or not.
    pub all_eigenvalues: Vec<f64>,
}

impl PcaProjection {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn cumulative_ratio(&self) -> f64 {
        self.explained_ratio.iter().sum()
    }

    pub fn standardize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    /// Projection of a row given in the fitted feature order.
    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        let z = self.standardize(row);
        self.components
            .iter()
            .map(|c| c.iter().zip(&z).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Back-projection to the standardized feature space.
    pub fn inverse_standardized(&self, scores: &[f64]) -> Vec<f64> {
        let d = self.mean.len();
        let mut z = vec![0.0; d];
        for (c, s) in self.components.iter().zip(scores) {
            for (zj, cj) in z.iter_mut().zip(c) {
                *zj += s * cj;
            }
        }
        z
    }
}

/// Fits PCA on the active columns and keeps the smallest number of components
/// whose cumulative explained-variance ratio reaches `variance`.
pub fn pca_fit(m: &FeatureMatrix, variance: f64) -> Result<PcaProjection> {
    if !(variance > 0.0 && variance <= 1.0) {
        return Err(Error::invalid("PCA variance must lie in (0, 1]"));
    }
    if m.n_rows() < 2 {
        return Err(Error::invalid("PCA needs at least 2 rows"));
    }
    let active = m.project_active();
    let (n, d) = (active.n_rows(), active.n_cols());
    let cols: Vec<Vec<f64>> = (0..d).map(|j| active.column(j)).collect();
    let mean: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let scale: Vec<f64> = cols
        .iter()
        .map(|c| {
            let s = sample_std(c);
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let z = DMatrix::from_fn(n, d, |i, j| (cols[j][i] - mean[j]) / scale[j]);
    let cov = (z.transpose() * &z) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = order.first().map_or(0.0, |&i| eig.eigenvalues[i].max(0.0));
    let tol = top * 1e-12 * d as f64;
    let kept: Vec<usize> = order.into_iter().filter(|&i| eig.eigenvalues[i] > tol).collect();
    let all_eigenvalues: Vec<f64> = kept.iter().map(|&i| eig.eigenvalues[i]).collect();
    let total: f64 = all_eigenvalues.iter().sum();

    let mut components = Vec::new();
    let mut eigenvalues = Vec::new();
    let mut explained_ratio = Vec::new();
    let mut cumulative = 0.0;
    for (&i, &lambda) in kept.iter().zip(&all_eigenvalues) {
        if cumulative >= variance - 1e-12 {
            break;
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        // sign convention: largest-magnitude loading is positive
        let pivot = v
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map_or(1.0, |(_, x)| x);
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        eigenvalues.push(lambda);
        let r = lambda / total;
        explained_ratio.push(r);
        cumulative += r;
    }

    Ok(PcaProjection {
        names: active.names().to_vec(),
        mean,
        scale,
        components,
        eigenvalues,
        explained_ratio,
        all_eigenvalues,
    })
}

/// Projects `m` (which must contain the fitted columns) onto the components.
pub fn pca_apply(p: &PcaProjection, m: &FeatureMatrix) -> Result<FeatureMatrix> {
    let sel = m.select_columns(&p.names)?;
    let rows = sel.rows().iter().map(|r| p.transform_row(r)).collect();
    let names = (1..=p.n_components()).map(|i| format!("PC{i}")).collect();
    FeatureMatrix::new(names, rows, m.labels().map(<[String]>::to_vec))
}
