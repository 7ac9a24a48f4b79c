use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of principal components for CM-FV.
pub const DEFAULT_COMPONENTS: usize = 16;

/// Relative eigenvalue cutoff below which a direction counts as rank-deficient.
const RANK_TOLERANCE: f64 = 1e-10;

/// Map from raw episode features to the space the conformal bag lives in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureExtractor {
    Identity,
    Pca(PcaBasis),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    pub mean: Vec<f64>,
    /// Orthonormal rows, largest variance first.
    pub components: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
}

impl FeatureExtractor {
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Identity => Ok(x.to_vec()),
            Self::Pca(basis) => {
                if x.len() != basis.mean.len() {
                    return Err(Error::Dimension {
                        expected: basis.mean.len(),
                        found: x.len(),
                    });
                }
                Ok(basis
                    .components
                    .iter()
                    .map(|c| c.iter().zip(x).zip(&basis.mean).map(|((w, v), m)| w * (v - m)).sum())
                    .collect())
            }
        }
    }

    pub fn output_dim(&self, input_dim: usize) -> usize {
        match self {
            Self::Identity => input_dim,
            Self::Pca(basis) => basis.components.len(),
        }
    }
}

/// Result of [`fit_pca`]: the extractor plus a warning if `k` was reduced.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaFit {
    pub extractor: FeatureExtractor,
    pub warning: Option<String>,
}

/// Mean-centred top-`k` principal components of `points`.
///
/// Each component is flipped so that its largest-magnitude entry is positive.
/// If `k` exceeds the numerical rank of the centred data it is reduced to the
/// rank and a warning is returned.
pub fn fit_pca(points: &[Vec<f64>], k: usize) -> Result<PcaFit> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 points, got {}",
            points.len()
        )));
    }
    let d = points[0].len();
    if let Some(bad) = points.iter().find(|p| p.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            found: bad.len(),
        });
    }
    let n = points.len();
    let mut mean = vec![0.0; d];
    for p in points {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centred = DMatrix::from_fn(n, d, |r, c| points[r][c] - mean[c]);
    let cov = (centred.transpose() * &centred) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let top = eig.eigenvalues[order[0]].max(0.0);
    let rank = order
        .iter()
        .filter(|&&i| eig.eigenvalues[i] > RANK_TOLERANCE * top.max(f64::MIN_POSITIVE))
        .count()
        .max(1);

    let mut warning = None;
    let mut k_used = k;
    if k > rank {
        k_used = rank;
        warning = Some(format!(
            "requested {k} principal components but the training data has rank {rank}; using {rank}"
        ));
    }

    let mut components = Vec::with_capacity(k_used);
    let mut explained = Vec::with_capacity(k_used);
    for &i in order.iter().take(k_used) {
        let mut c: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        let pivot = c
            .iter()
            .copied()
            .reduce(|a, b| if b.abs() > a.abs() { b } else { a })
            .unwrap_or(1.0);
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        c.iter_mut().for_each(|v| *v *= sign / norm);
        components.push(c);
        explained.push(if total > 0.0 {
            eig.eigenvalues[i].max(0.0) / total
        } else {
            0.0
        });
    }
    Ok(PcaFit {
        extractor: FeatureExtractor::Pca(PcaBasis {
            mean,
            components,
            explained_variance_ratio: explained,
        }),
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::bag::euclidean;
    use crate::rng::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn basis(fit: &PcaFit) -> &PcaBasis {
        match &fit.extractor {
            FeatureExtractor::Pca(b) => b,
            FeatureExtractor::Identity => panic!("expected a PCA basis"),
        }
    }

    fn gaussian_cloud(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = Rng::from_seed(seed);
        (0..n)
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect()
    }

    #[test]
    fn line_in_three_dimensions() {
        let dir = [1.0, 2.0, -3.0];
        let points: Vec<Vec<f64>> = (0..10)
            .map(|i| dir.iter().map(|d| d * f64::from(i) + 0.5).collect())
            .collect();
        let fit = fit_pca(&points, 1).unwrap();
        assert!(fit.warning.is_none());
        let b = basis(&fit);
        // Largest-magnitude entry (the third) is made positive.
        let norm = 14f64.sqrt();
        let expected = [-1.0 / norm, -2.0 / norm, 3.0 / norm];
        for (c, e) in b.components[0].iter().zip(expected) {
            assert!((c - e).abs() < 1e-10);
        }
        let proj: Vec<Vec<f64>> = points.iter().map(|p| fit.extractor.transform(p).unwrap()).collect();
        for i in 0..points.len() {
            for j in 0..points.len() {
                let a = euclidean(&points[i], &points[j]);
                let b = euclidean(&proj[i], &proj[j]);
                assert!((a - b).abs() < 1e-9);
            }
        }
        assert!((b.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_basis_preserves_distances() {
        let points = gaussian_cloud(50, 5, 1);
        let fit = fit_pca(&points, 5).unwrap();
        let b = basis(&fit);
        for (i, ci) in b.components.iter().enumerate() {
            for (j, cj) in b.components.iter().enumerate() {
                let dot: f64 = ci.iter().zip(cj).map(|(x, y)| x * y).sum();
                assert!((dot - f64::from(u8::from(i == j))).abs() < 1e-12);
            }
        }
        let proj: Vec<Vec<f64>> = points.iter().map(|p| fit.extractor.transform(p).unwrap()).collect();
        for i in 0..10 {
            for j in 0..10 {
                assert!((euclidean(&points[i], &points[j]) - euclidean(&proj[i], &proj[j])).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn isotropic_cloud_has_flat_spectrum() {
        let points = gaussian_cloud(10_000, 8, 2);
        let fit = fit_pca(&points, 2).unwrap();
        let ratio: f64 = basis(&fit).explained_variance_ratio.iter().sum();
        assert!((ratio - 0.25).abs() <= 0.05, "{ratio}");
    }

    #[test]
    fn k_above_rank_is_clamped_with_warning() {
        let points = vec![vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0]];
        let fit = fit_pca(&points, 3).unwrap();
        assert!(fit.warning.is_some());
        assert_eq!(fit.extractor.output_dim(3), 1);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(fit_pca(&[vec![1.0]], 1).is_err());
        assert!(fit_pca(&[vec![1.0], vec![2.0]], 0).is_err());
        assert!(fit_pca(&[vec![1.0], vec![2.0, 3.0]], 1).is_err());
        let fit = fit_pca(&gaussian_cloud(10, 3, 0), 2).unwrap();
        assert!(fit.extractor.transform(&[1.0]).is_err());
    }

    #[test]
    fn fit_is_deterministic() {
        let points = gaussian_cloud(40, 6, 3);
        assert_eq!(fit_pca(&points, 3).unwrap(), fit_pca(&points, 3).unwrap());
    }
}
