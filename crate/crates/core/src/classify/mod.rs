//! Paragraph classification along four axes behind swappable backends.
//!
//! Every backend returns [`ParagraphLabels`]: one label per axis plus the
//! probability vector it was derived from. Probability vectors are stored in
//! the declared label order of each axis enum; the stored label is always the
//! argmax, ties resolved toward the earlier label.

mod fixture;
#[cfg(feature = "onnx")]
mod graph;
mod labels;
mod stub;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Paragraph;

pub use fixture::{FixtureClassifier, LabelRecord};
#[cfg(feature = "onnx")]
pub use graph::{GraphRuntimeClassifier, ModelMetadata, ParityRecord};
pub use labels::{Axis, AxisLabel, Commitment, ParagraphLabels, Sentiment, Specificity, Target};
pub use stub::{stub_classify, StubClassifier};

/// Environment variable naming the default model directory for the graph
/// runtime backend (`<dir>/<axis>.onnx`).
pub const MODEL_DIR_ENV: &str = "CLIMATE_NARRATIVE_MODEL_DIR";

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("classifier backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("failed to load {axis} model from {path}: {reason}")]
    ModelLoadFailure {
        axis: Axis,
        path: PathBuf,
        reason: String,
    },
    #[error("paragraph {firm_id}#{seq} is absent from the fixture file")]
    FixtureMiss { firm_id: String, seq: usize },
    #[error("invalid fixture {path}, line {line}: {reason}")]
    InvalidFixture {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("paragraph {firm_id}#{seq} has empty text")]
    EmptyParagraph { firm_id: String, seq: usize },
    #[error("invalid scores: {0}")]
    InvalidScores(String),
    #[error("{axis} inference failed: {reason}")]
    Inference { axis: Axis, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    GraphRuntime,
    Fixture,
    Stub,
}

/// Which backend to use and where its files live.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub model_paths: BTreeMap<Axis, PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture_path: Option<PathBuf>,
}

impl BackendDescriptor {
    pub fn stub() -> Self {
        BackendDescriptor {
            kind: BackendKind::Stub,
            model_paths: BTreeMap::new(),
            fixture_path: None,
        }
    }

    pub fn fixture(path: impl Into<PathBuf>) -> Self {
        BackendDescriptor {
            kind: BackendKind::Fixture,
            model_paths: BTreeMap::new(),
            fixture_path: Some(path.into()),
        }
    }

    pub fn graph_runtime(model_paths: BTreeMap<Axis, PathBuf>) -> Self {
        BackendDescriptor {
            kind: BackendKind::GraphRuntime,
            model_paths,
            fixture_path: None,
        }
    }

    /// Model files expected under `dir` for every axis.
    pub fn models_in_dir(dir: &Path) -> BTreeMap<Axis, PathBuf> {
        Axis::ALL
            .iter()
            .map(|&axis| (axis, dir.join(format!("{}.onnx", axis.as_str()))))
            .collect()
    }

    /// Every file this backend reads.
    pub fn required_paths(&self) -> Vec<PathBuf> {
        match self.kind {
            BackendKind::Stub => Vec::new(),
            BackendKind::Fixture => self.fixture_path.iter().cloned().collect(),
            BackendKind::GraphRuntime => self.model_paths.values().cloned().collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ClassifyError> {
        match self.kind {
            BackendKind::Stub => Ok(()),
            BackendKind::Fixture => match &self.fixture_path {
                Some(p) if p.is_file() => Ok(()),
                Some(p) => Err(ClassifyError::BackendUnavailable(format!(
                    "fixture file {} does not exist",
                    p.display()
                ))),
                None => Err(ClassifyError::BackendUnavailable(
                    "fixture backend needs fixture_path".into(),
                )),
            },
            BackendKind::GraphRuntime => {
                for axis in Axis::ALL {
                    match self.model_paths.get(&axis) {
                        Some(p) if p.is_file() => {}
                        Some(p) => {
                            return Err(ClassifyError::BackendUnavailable(format!(
                                "{axis} model {} does not exist",
                                p.display()
                            )))
                        }
                        None => {
                            return Err(ClassifyError::BackendUnavailable(format!(
                                "no model path for axis {axis}"
                            )))
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

/// A paragraph classifier backend.
pub trait ParagraphClassifier: Send + Sync {
    fn classify(&self, paragraph: &Paragraph) -> Result<ParagraphLabels, ClassifyError>;

    /// Backends holding a single inference session return true; batches are
    /// then processed sequentially.
    fn exclusive(&self) -> bool {
        false
    }
}

/// Instantiates the backend named by `descriptor`.
pub fn open_backend(
    descriptor: &BackendDescriptor,
) -> Result<Box<dyn ParagraphClassifier>, ClassifyError> {
    descriptor.validate()?;
    match descriptor.kind {
        BackendKind::Stub => Ok(Box::new(StubClassifier)),
        BackendKind::Fixture => {
            let path = descriptor.fixture_path.as_ref().expect("validated");
            Ok(Box::new(FixtureClassifier::load(path)?))
        }
        #[cfg(feature = "onnx")]
        BackendKind::GraphRuntime => Ok(Box::new(GraphRuntimeClassifier::load(
            &descriptor.model_paths,
        )?)),
        #[cfg(not(feature = "onnx"))]
        BackendKind::GraphRuntime => Err(ClassifyError::BackendUnavailable(
            "built without the `onnx` feature".into(),
        )),
    }
}

/// Classifies paragraphs with an already opened backend, preserving order.
pub fn classify_with(
    paragraphs: &[Paragraph],
    classifier: &dyn ParagraphClassifier,
) -> Result<Vec<ParagraphLabels>, ClassifyError> {
    if let Some(p) = paragraphs.iter().find(|p| p.text.trim().is_empty()) {
        return Err(ClassifyError::EmptyParagraph {
            firm_id: p.firm_id.clone(),
            seq: p.seq,
        });
    }
    if classifier.exclusive() {
        paragraphs.iter().map(|p| classifier.classify(p)).collect()
    } else {
        paragraphs
            .par_iter()
            .map(|p| classifier.classify(p))
            .collect()
    }
}

/// Opens the backend described by `backend` and classifies every paragraph.
pub fn classify_batch(
    paragraphs: &[Paragraph],
    backend: &BackendDescriptor,
) -> Result<Vec<ParagraphLabels>, ClassifyError> {
    let classifier = open_backend(backend)?;
    classify_with(paragraphs, classifier.as_ref())
}
