use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{ClusterError, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    /// Column means removed before projection.
    pub mean: Vec<f64>,
    /// n_components × d, one unit loading vector per row.
    pub components: Matrix,
    pub eigenvalues: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    /// n × n_components.
    pub scores: Matrix,
}

impl Pca {
    /// Maps scores back to feature space.
    pub fn reconstruct(&self) -> Matrix {
        let (n, d) = (self.scores.rows(), self.components.cols());
        let mut out = Matrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                let v: f64 = (0..self.components.rows())
                    .map(|c| self.scores.get(i, c) * self.components.get(c, j))
                    .sum();
                out.set(i, j, self.mean[j] + v);
            }
        }
        out
    }
}

/// Eigen-decomposition of the sample covariance. Components come in
/// descending eigenvalue order, each signed so that its largest-magnitude
/// loading is positive.
pub fn pca_project(x: &Matrix, n_components: usize) -> Result<Pca, ClusterError> {
    let (n, d) = (x.rows(), x.cols());
    if n_components == 0 || n_components > d {
        return Err(ClusterError::InvalidComponents {
            requested: n_components,
            dims: d,
        });
    }
    if n < 2 {
        return Err(ClusterError::TooFewRows { rows: n, needed: 2 });
    }
    let mean = x.column_means();
    let centered = DMatrix::from_fn(n, d, |i, j| x.get(i, j) - mean[j]);
    let cov = (centered.transpose() * &centered) / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();

    let mut components = Matrix::zeros(n_components, d);
    let mut eigenvalues = Vec::with_capacity(n_components);
    for (c, &idx) in order.iter().take(n_components).enumerate() {
        let v = eig.eigenvectors.column(idx);
        let pivot = (0..d)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
            .expect("d >= 1");
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            components.set(c, j, sign * v[j]);
        }
        eigenvalues.push(eig.eigenvalues[idx].max(0.0));
    }
    let explained_ratio = eigenvalues
        .iter()
        .map(|v| if total > 0.0 { v / total } else { 0.0 })
        .collect();
    let mut scores = Matrix::zeros(n, n_components);
    for i in 0..n {
        for c in 0..n_components {
            let s: f64 = (0..d)
                .map(|j| centered[(i, j)] * components.get(c, j))
                .sum();
            scores.set(i, c, s);
        }
    }
    Ok(Pca {
        mean,
        components,
        eigenvalues,
        explained_ratio,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn collinear_data_has_one_component() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![i as f64, 2.0 * i as f64 + 1.0])
            .collect();
        let p = pca_project(&Matrix::from_rows(&rows).unwrap(), 2).unwrap();
        assert!(p.explained_ratio[0] >= 0.999);
        // largest loading positive
        assert!(p.components.get(0, 1) > 0.0);
    }

    #[test]
    fn bad_component_count() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 1.0]]).unwrap();
        assert!(pca_project(&x, 3).is_err());
        assert!(pca_project(&x, 0).is_err());
    }

    proptest! {
        #[test]
        fn full_reconstruction_and_ratios(rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 3..40)) {
            let x = Matrix::from_rows(&rows).unwrap();
            let p = pca_project(&x, 4).unwrap();
            prop_assert!(p.explained_ratio.iter().sum::<f64>() <= 1.0 + 1e-9);
            prop_assert!(p.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            let back = p.reconstruct();
            for i in 0..x.rows() {
                for j in 0..x.cols() {
                    prop_assert!((back.get(i, j) - x.get(i, j)).abs() <= 1e-9);
                }
            }
        }
    }
}
