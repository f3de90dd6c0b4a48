//! Tables, figures and the run manifest.
//!
//! Rendering is pure: the same bundle always yields the same bytes. Only
//! the manifest timestamp depends on the clock.

pub mod svg;
pub mod tables;

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cluster::ClusterReport;
use crate::firms::{Scope, ScopeEdges};
use crate::stats::StatsBundle;

pub use tables::{render_tables, Table};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot render {0}: analysis missing")]
    MissingAnalysis(&'static str),
    #[error("render failed: {0}")]
    Render(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One rendered output file, path relative to the report directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub path: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(path: impl Into<String>, bytes: Vec<u8>) -> Self {
        Artifact {
            path: path.into(),
            bytes,
        }
    }
}

pub const HEATMAP: &str = "figures/correlation_heatmap.svg";
pub const ELBOW: &str = "figures/elbow.svg";
pub const PCA_SCATTER: &str = "figures/pca_clusters.svg";

/// Heatmap needs the stats bundle; elbow and scatter need clustering.
pub fn render_figures(
    stats: Option<&StatsBundle>,
    cluster: Option<&ClusterReport>,
) -> Result<Vec<Artifact>, ReportError> {
    let stats = stats.ok_or(ReportError::MissingAnalysis("correlation heatmap"))?;
    let cluster = cluster.ok_or(ReportError::MissingAnalysis("elbow curve"))?;
    let jobs: [&(dyn Fn() -> Artifact + Sync); 3] = [
        &|| Artifact::new(HEATMAP, svg::heatmap(&stats.correlation).into_bytes()),
        &|| Artifact::new(ELBOW, svg::elbow(&cluster.elbow).into_bytes()),
        &|| {
            Artifact::new(
                PCA_SCATTER,
                svg::pca_scatter(&cluster.pca, &cluster.kmeans.assignments).into_bytes(),
            )
        },
    ];
    Ok(jobs.par_iter().map(|job| job()).collect())
}

/// Every table and figure, sorted by path.
pub fn render_all(
    stats: &StatsBundle,
    cluster: &ClusterReport,
) -> Result<Vec<Artifact>, ReportError> {
    let (tables, figures) = rayon::join(
        || render_tables(stats, Some(cluster)),
        || render_figures(Some(stats), Some(cluster)),
    );
    let mut out = tables?;
    out.extend(figures?);
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, ReportError> {
    Ok(sha256_hex(&fs::read(path).map_err(io_err(path))?))
}

/// Writes artifacts under `dir` and returns their digests keyed by relative path.
pub fn write_artifacts(
    dir: &Path,
    artifacts: &[Artifact],
) -> Result<BTreeMap<String, String>, ReportError> {
    let mut inventory = BTreeMap::new();
    for a in artifacts {
        let path = dir.join(&a.path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, &a.bytes).map_err(io_err(&path))?;
        inventory.insert(a.path.clone(), sha256_hex(&a.bytes));
    }
    Ok(inventory)
}

/// Provenance record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// RFC 3339, UTC.
    pub timestamp: String,
    pub tool_version: String,
    /// Full pipeline configuration (thresholds, binning, seeds).
    pub config: serde_json::Value,
    pub bin_edges: BTreeMap<Scope, ScopeEdges>,
    /// Input file digests, keyed by the path as given in the config.
    pub inputs: BTreeMap<String, String>,
    /// Output digests keyed by path relative to the output directory.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(
        config: serde_json::Value,
        bin_edges: BTreeMap<Scope, ScopeEdges>,
        inputs: BTreeMap<String, String>,
        outputs: BTreeMap<String, String>,
    ) -> Self {
        RunManifest {
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            bin_edges,
            inputs,
            outputs,
        }
    }

    /// Copy with the timestamp blanked, for run-to-run comparison.
    pub fn without_timestamp(&self) -> Self {
        RunManifest {
            timestamp: String::new(),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn write(&self, path: &Path) -> Result<(), ReportError> {
        fs::write(path, self.to_json()?).map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self, ReportError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }
}
