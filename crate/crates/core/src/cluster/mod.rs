//! Typology clustering of firms on standardized narrative and emission codes.

mod features;
mod gmm;
mod kmeans;
mod matrix;
mod pca;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::firms::JoinedRecord;

pub use features::{build_features, standardize, FeatureMatrix, Standardization, FEATURE_COLUMNS};
pub use gmm::{
    gmm_fit, n_params, select_k_bic, BicPoint, BicScan, CovarianceKind, GmmFit, VARIANCE_FLOOR,
};
pub use kmeans::{elbow_scan, kmeans_fit, ElbowPoint, ElbowScan, KMeansFit};
pub use matrix::Matrix;
pub use pca::{pca_project, Pca};

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("k = {k} is invalid for {rows} rows")]
    InvalidK { k: usize, rows: usize },
    #[error("{rows} rows, at least {needed} needed")]
    TooFewRows { rows: usize, needed: usize },
    #[error("{requested} components requested from {dims} dimensions")]
    InvalidComponents { requested: usize, dims: usize },
    #[error("no mixture could be fitted in the requested range")]
    NoFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    /// Clusters in the headline KMeans model.
    pub k: usize,
    pub seed: u64,
    pub n_restarts: usize,
    /// Upper end of the elbow scan (starts at 1).
    pub elbow_k_max: usize,
    /// Upper end of the BIC scan (starts at 1).
    pub bic_k_max: usize,
    pub covariance: CovarianceKind,
    pub pca_components: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            k: 10,
            seed: 42,
            n_restarts: 20,
            elbow_k_max: 15,
            bic_k_max: 10,
            covariance: CovarianceKind::Diagonal,
            pca_components: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMethod {
    Kmeans,
    Gmm,
}

/// A fitted model in artifact form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub method: ClusterMethod,
    pub k: usize,
    pub row_ids: Vec<String>,
    pub assignments: Vec<usize>,
    pub centroids_std: Matrix,
    pub centroids_original: Matrix,
    pub inertia: Option<f64>,
    pub bic: Option<f64>,
    pub log_likelihood: Option<f64>,
    pub seed: u64,
    pub n_restarts: usize,
    pub empty_cluster_repairs: usize,
    pub variance_floor_hits: usize,
}

impl ClusterModel {
    pub fn from_kmeans(fit: &KMeansFit, row_ids: &[String], s: &Standardization) -> Self {
        ClusterModel {
            method: ClusterMethod::Kmeans,
            k: fit.k,
            row_ids: row_ids.to_vec(),
            assignments: fit.assignments.clone(),
            centroids_original: s.inverse(&fit.centroids),
            centroids_std: fit.centroids.clone(),
            inertia: Some(fit.inertia),
            bic: None,
            log_likelihood: None,
            seed: fit.seed,
            n_restarts: fit.n_restarts,
            empty_cluster_repairs: fit.empty_cluster_repairs,
            variance_floor_hits: 0,
        }
    }

    pub fn from_gmm(fit: &GmmFit, row_ids: &[String], s: &Standardization) -> Self {
        ClusterModel {
            method: ClusterMethod::Gmm,
            k: fit.k,
            row_ids: row_ids.to_vec(),
            assignments: fit.assignments.clone(),
            centroids_original: s.inverse(&fit.means),
            centroids_std: fit.means.clone(),
            inertia: None,
            bic: Some(fit.bic),
            log_likelihood: Some(fit.log_likelihood),
            seed: fit.seed,
            n_restarts: 1,
            empty_cluster_repairs: 0,
            variance_floor_hits: fit.variance_floor_hits,
        }
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        self.assignments.iter().for_each(|&a| counts[a] += 1);
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub cluster: usize,
    pub count: usize,
    pub centroid_std: Vec<f64>,
    pub centroid_original: Vec<f64>,
    pub sectors: BTreeMap<String, usize>,
    pub cap_classes: BTreeMap<String, usize>,
    pub emp_classes: BTreeMap<String, usize>,
}

/// Per-cluster counts, centroids and sector / size composition.
pub fn profile_clusters(model: &ClusterModel, records: &[JoinedRecord]) -> Vec<ClusterProfile> {
    let by_id: BTreeMap<&str, &JoinedRecord> =
        records.iter().map(|r| (r.firm_id.as_str(), r)).collect();
    let mut profiles: Vec<ClusterProfile> = (0..model.k)
        .map(|c| ClusterProfile {
            cluster: c,
            count: 0,
            centroid_std: model.centroids_std.row(c).to_vec(),
            centroid_original: model.centroids_original.row(c).to_vec(),
            sectors: BTreeMap::new(),
            cap_classes: BTreeMap::new(),
            emp_classes: BTreeMap::new(),
        })
        .collect();
    for (id, &c) in model.row_ids.iter().zip(&model.assignments) {
        let p = &mut profiles[c];
        p.count += 1;
        if let Some(r) = by_id.get(id.as_str()) {
            *p.sectors.entry(r.sector.label().to_string()).or_default() += 1;
            *p.cap_classes.entry(r.cap_class.to_string()).or_default() += 1;
            *p.emp_classes.entry(r.emp_class.to_string()).or_default() += 1;
        }
    }
    profiles
}

/// Adjusted Rand index between two labelings of the same rows.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len() as f64;
    let choose2 = |x: f64| x * (x - 1.0) / 2.0;
    let mut table: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, f64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *rows.entry(x).or_default() += 1.0;
        *cols.entry(y).or_default() += 1.0;
    }
    let index: f64 = table.values().map(|&v| choose2(v)).sum();
    let sum_a: f64 = rows.values().map(|&v| choose2(v)).sum();
    let sum_b: f64 = cols.values().map(|&v| choose2(v)).sum();
    let expected = sum_a * sum_b / choose2(n);
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Everything the clustering stage produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub columns: Vec<String>,
    pub excluded_rows: Vec<String>,
    pub standardization: Standardization,
    pub kmeans: ClusterModel,
    pub elbow: ElbowScan,
    pub bic: BicScan,
    pub gmm: ClusterModel,
    pub pca: Pca,
    pub profiles: Vec<ClusterProfile>,
}

pub fn run_clustering(
    records: &[JoinedRecord],
    cfg: &ClusterConfig,
) -> Result<ClusterReport, ClusterError> {
    let features = build_features(records);
    let n = features.values.rows();
    if !features.excluded.is_empty() {
        log::info!(
            "clustering: {} firms without scope 1/2 classes left out",
            features.excluded.len()
        );
    }
    let (z, s) = standardize(&features.values)?;
    let fit = kmeans_fit(&z, cfg.k, cfg.seed, cfg.n_restarts)?;
    let kmeans = ClusterModel::from_kmeans(&fit, &features.row_ids, &s);
    let elbow = elbow_scan(
        &z,
        1..=cfg.elbow_k_max.clamp(1, n),
        cfg.seed,
        cfg.n_restarts,
    )?;
    let bic = select_k_bic(&z, 1..=cfg.bic_k_max.clamp(1, n), cfg.seed, cfg.covariance)?;
    let gmm_fit = gmm_fit(&z, bic.best_k, cfg.seed, cfg.covariance)?;
    let gmm = ClusterModel::from_gmm(&gmm_fit, &features.row_ids, &s);
    let pca = pca_project(&z, cfg.pca_components.clamp(1, z.cols()))?;
    let profiles = profile_clusters(&kmeans, records);
    Ok(ClusterReport {
        columns: features.columns,
        excluded_rows: features.excluded,
        standardization: s,
        kmeans,
        elbow,
        bic,
        gmm,
        pca,
        profiles,
    })
}
