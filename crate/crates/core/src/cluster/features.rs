use serde::{Deserialize, Serialize};

use super::{ClusterError, Matrix};
use crate::firms::JoinedRecord;

pub const FEATURE_COLUMNS: [&str; 6] = [
    "sentiment",
    "commitment",
    "specificity",
    "netzero",
    "scope1_class",
    "scope2_class",
];

/// Clustering input: narrative codes plus scope 1 and 2 class codes.
/// Scope 3 is left out because it is missing too often.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub row_ids: Vec<String>,
    pub values: Matrix,
    /// Firms dropped for a missing scope class.
    pub excluded: Vec<String>,
}

pub fn build_features(records: &[JoinedRecord]) -> FeatureMatrix {
    let mut rows = Vec::new();
    let mut row_ids = Vec::new();
    let mut excluded = Vec::new();
    for r in records {
        match (r.ei_class, r.ej_class) {
            (Some(ei), Some(ej)) => {
                rows.push(vec![
                    r.sentiment.code() as f64,
                    r.commitment.code() as f64,
                    r.specificity.code() as f64,
                    r.netzero.code() as f64,
                    ei.code() as f64,
                    ej.code() as f64,
                ]);
                row_ids.push(r.firm_id.clone());
            }
            _ => excluded.push(r.firm_id.clone()),
        }
    }
    let values = if rows.is_empty() {
        Matrix::zeros(0, FEATURE_COLUMNS.len())
    } else {
        Matrix::from_rows(&rows).expect("fixed width")
    };
    FeatureMatrix {
        columns: FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect(),
        row_ids,
        values,
        excluded,
    }
}

/// Per-column z-scoring parameters (sample standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    /// 0 for constant columns.
    pub stds: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardization {
    pub fn fit(x: &Matrix) -> Result<Self, ClusterError> {
        if x.rows() < 2 {
            return Err(ClusterError::TooFewRows {
                rows: x.rows(),
                needed: 2,
            });
        }
        let means = x.column_means();
        let mut stds = vec![0.0; x.cols()];
        for r in x.iter_rows() {
            for ((s, v), m) in stds.iter_mut().zip(r).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let mut constant = vec![false; x.cols()];
        for (j, s) in stds.iter_mut().enumerate() {
            *s = (*s / (x.rows() - 1) as f64).sqrt();
            if *s == 0.0 {
                constant[j] = true;
                log::warn!("feature column {j} is constant; standardized to 0");
            }
        }
        Ok(Standardization {
            means,
            stds,
            constant,
        })
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = if self.constant[j] {
                    0.0
                } else {
                    (*v - self.means[j]) / self.stds[j]
                };
            }
        }
        out
    }

    /// `mean + std * z`; constant columns map back to their mean.
    pub fn inverse(&self, z: &Matrix) -> Matrix {
        let mut out = z.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = self.means[j] + self.stds[j] * *v;
            }
        }
        out
    }
}

/// Fits and applies z-scoring.
pub fn standardize(x: &Matrix) -> Result<(Matrix, Standardization), ClusterError> {
    let s = Standardization::fit(x)?;
    Ok((s.transform(x), s))
}
