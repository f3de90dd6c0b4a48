//! ONNX graph-runtime backend.
//!
//! Each axis has its own `<axis>.onnx` with a sidecar `<axis>.json`
//! ([`ModelMetadata`]) naming the model's label order, maximum sequence
//! length and tokenizer file. Model outputs are softmaxed and reordered to
//! the declared label order of the axis.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tokenizers::{Tokenizer, TruncationParams};
use tract_onnx::prelude::*;

use super::labels::{softmax, Axis, ParagraphLabels};
use super::{ClassifyError, ParagraphClassifier};
use crate::corpus::Paragraph;

/// Sidecar metadata exported next to every model file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub axis: Axis,
    /// Label names in model output order.
    pub labels: Vec<String>,
    pub max_sequence_length: usize,
    /// Tokenizer file, relative to the metadata file.
    pub tokenizer: PathBuf,
}

impl ModelMetadata {
    pub fn sidecar_path(model_path: &Path) -> PathBuf {
        model_path.with_extension("json")
    }
}

/// Reference logits for parity checks: one JSON line per (text, axis).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityRecord {
    pub text: String,
    pub axis: Axis,
    pub logits: Vec<f32>,
}

/// Maps an exported label name onto the axis's declared order. Names are
/// matched case-insensitively, with the common aliases of binary heads.
fn canonical_index(axis: Axis, name: &str) -> Option<usize> {
    let n = name.trim().to_ascii_lowercase().replace(['-', ' '], "_");
    let idx = match (axis, n.as_str()) {
        (Axis::Sentiment, "risk" | "negative") => 0,
        (Axis::Sentiment, "neutral") => 1,
        (Axis::Sentiment, "opportunity" | "positive") => 2,
        (Axis::Commitment, "commitment" | "yes" | "commit") => 0,
        (Axis::Commitment, "no_commitment" | "no" | "none") => 1,
        (Axis::Specificity, "specific" | "spec" | "yes") => 0,
        (Axis::Specificity, "general" | "non_specific" | "nonspecific" | "no") => 1,
        (Axis::Target, "netzero" | "net_zero") => 0,
        (Axis::Target, "reduction") => 1,
        (Axis::Target, "no_target" | "none" | "notarget") => 2,
        _ => return None,
    };
    Some(idx)
}

#[derive(Debug, Clone, Copy)]
enum InputKind {
    Ids,
    Mask,
    TokenTypes,
}

struct AxisModel {
    plan: Arc<TypedRunnableModel>,
    inputs: Vec<InputKind>,
    tokenizer: Tokenizer,
    /// Same tokenizer without truncation, used to detect overlong input.
    full_tokenizer: Tokenizer,
    max_len: usize,
    /// `order[i]` is the canonical index of model output `i`.
    order: Vec<usize>,
}

impl AxisModel {
    fn load(axis: Axis, path: &Path) -> Result<Self, ClassifyError> {
        let fail = |reason: String| ClassifyError::ModelLoadFailure {
            axis,
            path: path.to_path_buf(),
            reason,
        };
        let meta_path = ModelMetadata::sidecar_path(path);
        let meta: ModelMetadata = fs::read_to_string(&meta_path)
            .map_err(|e| fail(format!("metadata {}: {e}", meta_path.display())))
            .and_then(|s| {
                serde_json::from_str(&s)
                    .map_err(|e| fail(format!("metadata {}: {e}", meta_path.display())))
            })?;
        if meta.axis != axis {
            return Err(fail(format!("metadata describes axis {}", meta.axis)));
        }
        if meta.labels.len() != axis.label_count() {
            return Err(fail(format!(
                "expected {} labels, metadata lists {}",
                axis.label_count(),
                meta.labels.len()
            )));
        }
        let mut order = Vec::with_capacity(meta.labels.len());
        for name in &meta.labels {
            let idx = canonical_index(axis, name)
                .ok_or_else(|| fail(format!("unknown label {name:?}")))?;
            if order.contains(&idx) {
                return Err(fail(format!("label {name:?} duplicates another label")));
            }
            order.push(idx);
        }

        let tok_path = meta_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&meta.tokenizer);
        let mut full_tokenizer = Tokenizer::from_file(&tok_path)
            .map_err(|e| fail(format!("tokenizer {}: {e}", tok_path.display())))?;
        full_tokenizer
            .with_truncation(None)
            .map_err(|e| fail(e.to_string()))?;
        full_tokenizer.with_padding(None);
        let mut tokenizer = full_tokenizer.clone();
        tokenizer
            .with_truncation(Some(TruncationParams {
                max_length: meta.max_sequence_length,
                ..Default::default()
            }))
            .map_err(|e| fail(format!("tokenizer truncation: {e}")))?;
        tokenizer.with_padding(None);

        let graph = tract_onnx::onnx()
            .model_for_path(path)
            .map_err(|e| fail(e.to_string()))?;
        let mut inputs = Vec::new();
        for outlet in graph.input_outlets().map_err(|e| fail(e.to_string()))? {
            let name = graph.node(outlet.node).name.as_str();
            inputs.push(match name {
                "input_ids" => InputKind::Ids,
                "attention_mask" => InputKind::Mask,
                "token_type_ids" => InputKind::TokenTypes,
                other => return Err(fail(format!("unexpected model input {other:?}"))),
            });
        }
        let plan = graph
            .into_optimized()
            .and_then(|m| m.into_runnable())
            .map_err(|e| fail(e.to_string()))?;
        Ok(AxisModel {
            plan,
            inputs,
            tokenizer,
            full_tokenizer,
            max_len: meta.max_sequence_length,
            order,
        })
    }

    /// Raw logits in model order, plus whether the input was truncated.
    fn logits(&self, axis: Axis, text: &str) -> Result<(Vec<f32>, bool), ClassifyError> {
        let fail = |reason: String| ClassifyError::Inference { axis, reason };
        let enc = self
            .tokenizer
            .encode(text, true)
            .map_err(|e| fail(e.to_string()))?;
        let truncated = self
            .full_tokenizer
            .encode(text, true)
            .map_err(|e| fail(e.to_string()))?
            .get_ids()
            .len()
            > self.max_len;
        let n = enc.get_ids().len();
        let column = |values: Vec<i64>| -> Result<TValue, ClassifyError> {
            let arr = tract_ndarray::Array2::from_shape_vec((1, n), values)
                .map_err(|e| fail(e.to_string()))?;
            Ok(Tensor::from(arr).into())
        };
        let mut feed = TVec::new();
        for kind in &self.inputs {
            feed.push(match kind {
                InputKind::Ids => column(enc.get_ids().iter().map(|&i| i as i64).collect())?,
                InputKind::Mask => {
                    column(enc.get_attention_mask().iter().map(|&i| i as i64).collect())?
                }
                InputKind::TokenTypes => column(vec![0; n])?,
            });
        }
        let out = self.plan.run(feed).map_err(|e| fail(e.to_string()))?;
        let view = out[0]
            .to_plain_array_view::<f32>()
            .map_err(|e| fail(e.to_string()))?;
        let logits: Vec<f32> = view.iter().copied().collect();
        if logits.len() != self.order.len() {
            return Err(fail(format!(
                "model produced {} logits, expected {}",
                logits.len(),
                self.order.len()
            )));
        }
        Ok((logits, truncated))
    }
}

/// Classifier backed by one ONNX model per axis.
pub struct GraphRuntimeClassifier {
    models: BTreeMap<Axis, AxisModel>,
}

impl GraphRuntimeClassifier {
    pub fn load(model_paths: &BTreeMap<Axis, PathBuf>) -> Result<Self, ClassifyError> {
        let mut models = BTreeMap::new();
        for axis in Axis::ALL {
            let path = model_paths.get(&axis).ok_or_else(|| {
                ClassifyError::BackendUnavailable(format!("no model path for axis {axis}"))
            })?;
            models.insert(axis, AxisModel::load(axis, path)?);
        }
        Ok(GraphRuntimeClassifier { models })
    }

    /// Raw logits in the model's own output order.
    pub fn logits(&self, axis: Axis, text: &str) -> Result<Vec<f32>, ClassifyError> {
        Ok(self.models[&axis].logits(axis, text)?.0)
    }
}

impl ParagraphClassifier for GraphRuntimeClassifier {
    fn classify(&self, paragraph: &Paragraph) -> Result<ParagraphLabels, ClassifyError> {
        let mut scores = BTreeMap::new();
        let mut truncated = false;
        for (&axis, model) in &self.models {
            let (logits, cut) = model.logits(axis, &paragraph.text)?;
            truncated |= cut;
            let probs = softmax(&logits.iter().map(|&l| f64::from(l)).collect::<Vec<_>>());
            let mut canonical = vec![0.0; probs.len()];
            for (i, p) in probs.into_iter().enumerate() {
                canonical[model.order[i]] = p;
            }
            scores.insert(axis, canonical);
        }
        let mut labels = ParagraphLabels::from_scores(scores)?;
        labels.truncated = truncated;
        Ok(labels)
    }
}
