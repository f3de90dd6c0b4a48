use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::aggregate::AggregationConfig;
use crate::classify::{Axis, BackendDescriptor, BackendKind, MODEL_DIR_ENV};
use crate::cluster::ClusterConfig;
use crate::corpus::DEFAULT_MIN_CHARS;
use crate::firms::EmissionBinning;
use crate::keywords::KeywordSet;

/// Classifier backend as written in the config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Directory holding `<axis>.onnx` and `<axis>.json`. Falls back to
    /// the model directory environment variable when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_dir: Option<PathBuf>,
    /// Per-axis overrides of the model path.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub model_paths: BTreeMap<Axis, PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture_path: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Stub,
            model_dir: None,
            model_paths: BTreeMap::new(),
            fixture_path: None,
        }
    }
}

/// Canonical run configuration. Relative paths resolve against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest_csv: PathBuf,
    pub firms_csv: PathBuf,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_min_chars")]
    pub min_chars: usize,
    /// Replaces the built-in keyword list when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keywords: Option<KeywordSet>,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub aggregation: AggregationConfig,
    #[serde(default)]
    pub binning: EmissionBinning,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_min_chars() -> usize {
    DEFAULT_MIN_CHARS
}

impl PipelineConfig {
    /// A config with defaults everywhere except the three required paths.
    pub fn new(
        manifest_csv: impl Into<PathBuf>,
        firms_csv: impl Into<PathBuf>,
        output_dir: impl Into<PathBuf>,
    ) -> Self {
        PipelineConfig {
            manifest_csv: manifest_csv.into(),
            firms_csv: firms_csv.into(),
            output_dir: output_dir.into(),
            workers: 0,
            min_chars: DEFAULT_MIN_CHARS,
            keywords: None,
            backend: BackendConfig::default(),
            aggregation: AggregationConfig::default(),
            binning: EmissionBinning::default(),
            cluster: ClusterConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut cfg = Self::from_toml(&text).map_err(|reason| PipelineError::Config {
            path: path.to_path_buf(),
            reason,
        })?;
        cfg.base_dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf();
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.base_dir = PathBuf::from(".");
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, PipelineError> {
        toml::to_string(self).map_err(|e| PipelineError::Invalid(e.to_string()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Display key of an input path: relative to the config directory when
    /// possible, so that relocated checkouts produce the same manifest.
    pub fn input_key(&self, p: &Path) -> String {
        p.strip_prefix(&self.base_dir)
            .unwrap_or(p)
            .to_string_lossy()
            .replace('\\', "/")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.resolve(&self.manifest_csv)
    }

    pub fn firms_path(&self) -> PathBuf {
        self.resolve(&self.firms_csv)
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn keyword_set(&self) -> KeywordSet {
        self.keywords.clone().unwrap_or_default()
    }

    /// Backend descriptor with every path resolved.
    pub fn backend_descriptor(&self) -> Result<BackendDescriptor, PipelineError> {
        let b = &self.backend;
        Ok(match b.kind {
            BackendKind::Stub => BackendDescriptor::stub(),
            BackendKind::Fixture => {
                let p = b.fixture_path.as_ref().ok_or_else(|| {
                    PipelineError::Invalid(
                        "backend.kind = \"fixture\" needs backend.fixture_path".into(),
                    )
                })?;
                BackendDescriptor::fixture(self.resolve(p))
            }
            BackendKind::GraphRuntime => {
                let dir = match &b.model_dir {
                    Some(d) => Some(self.resolve(d)),
                    None => std::env::var_os(MODEL_DIR_ENV).map(PathBuf::from),
                };
                let mut paths = dir
                    .map(|d| BackendDescriptor::models_in_dir(&d))
                    .unwrap_or_default();
                for (axis, p) in &b.model_paths {
                    paths.insert(*axis, self.resolve(p));
                }
                if paths.len() != Axis::ALL.len() {
                    return Err(PipelineError::Invalid(format!(
                        "graph_runtime backend needs backend.model_dir, backend.model_paths or {MODEL_DIR_ENV}"
                    )));
                }
                BackendDescriptor::graph_runtime(paths)
            }
        })
    }

    /// Checks everything that can be checked without running a stage.
    pub fn validate(&self) -> Result<(), PipelineError> {
        for (name, p) in [
            ("manifest_csv", self.manifest_path()),
            ("firms_csv", self.firms_path()),
        ] {
            if !p.is_file() {
                return Err(PipelineError::Invalid(format!(
                    "{name} {} does not exist",
                    p.display()
                )));
            }
        }
        if self.min_chars == 0 {
            return Err(PipelineError::Invalid(
                "min_chars must be at least 1".into(),
            ));
        }
        self.aggregation
            .validate()
            .map_err(|e| PipelineError::Invalid(e.to_string()))?;
        self.binning
            .validate()
            .map_err(|e| PipelineError::Invalid(e.to_string()))?;
        let c = &self.cluster;
        if c.k == 0
            || c.n_restarts == 0
            || c.elbow_k_max == 0
            || c.bic_k_max == 0
            || c.pca_components == 0
        {
            return Err(PipelineError::Invalid(
                "cluster.k, n_restarts, elbow_k_max, bic_k_max and pca_components must be positive"
                    .into(),
            ));
        }
        self.backend_descriptor()?
            .validate()
            .map_err(|e| PipelineError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Config as JSON, paths as written.
    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is serializable")
    }
}
