//! Stage orchestration: ingest → classify → aggregate → join → stats →
//! cluster → report, each reading and writing plain files under the output
//! directory.
//!
//! A stage is skipped when its stamp (`stages/<stage>.stamp.json`) records
//! the same key and every recorded output still has its recorded digest.
//! The key covers the stage's config section, the digests of its upstream
//! artifacts and of any external inputs it reads.

mod config;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{
    aggregate_corpus, read_narratives_csv, write_narratives_csv, AggregateError,
};
use crate::classify::{classify_batch, ClassifyError, LabelRecord, ParagraphLabels};
use crate::cluster::{run_clustering, ClusterError, ClusterReport};
use crate::corpus::{extract_text, load_manifest, segment_paragraphs, IngestError, Paragraph};
use crate::firms::{
    join, load_firms, read_joined_csv, write_joined_csv, FirmDataError, RejectedRow, Scope,
    ScopeEdges,
};
use crate::keywords::{filter_corpus, ClimateParagraph, DocumentRetention};
use crate::report::{
    render_all, sha256_file, sha256_hex, write_artifacts, ReportError, RunManifest,
};
use crate::stats::{analyze, StatsBundle, StatsError};

pub use config::{BackendConfig, PipelineConfig};

pub const PARAGRAPHS: &str = "paragraphs.jsonl";
pub const CLIMATE_PARAGRAPHS: &str = "climate_paragraphs.jsonl";
pub const RETENTION: &str = "retention.csv";
pub const INGEST_ERRORS: &str = "ingest_errors.csv";
pub const LABELS: &str = "labels.jsonl";
pub const NARRATIVES: &str = "narratives.csv";
pub const SKIPPED_FIRMS: &str = "skipped_firms.csv";
pub const JOINED: &str = "joined.csv";
pub const BINS: &str = "bins.json";
pub const JOIN_ISSUES: &str = "join_issues.json";
pub const STATS: &str = "stats.json";
pub const CLUSTER: &str = "cluster.json";
pub const MANIFEST: &str = "manifest.json";
pub const STAMP_DIR: &str = "stages";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Classify,
    Aggregate,
    Join,
    Stats,
    Cluster,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Classify,
        Stage::Aggregate,
        Stage::Join,
        Stage::Stats,
        Stage::Cluster,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Classify => "classify",
            Stage::Aggregate => "aggregate",
            Stage::Join => "join",
            Stage::Stats => "stats",
            Stage::Cluster => "cluster",
            Stage::Report => "report",
        }
    }

    /// Artifacts that must exist before the stage can run.
    pub fn upstream(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest => &[],
            Stage::Classify => &[CLIMATE_PARAGRAPHS],
            Stage::Aggregate => &[LABELS, RETENTION],
            Stage::Join => &[NARRATIVES],
            Stage::Stats | Stage::Cluster => &[JOINED],
            Stage::Report => &[
                PARAGRAPHS,
                CLIMATE_PARAGRAPHS,
                RETENTION,
                INGEST_ERRORS,
                LABELS,
                NARRATIVES,
                SKIPPED_FIRMS,
                JOINED,
                BINS,
                JOIN_ISSUES,
                STATS,
                CLUSTER,
            ],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| PipelineError::UnknownStage(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config {path}: {reason}")]
    Config { path: PathBuf, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("unknown stage `{0}`")]
    UnknownStage(String),
    #[error("stage {stage}: upstream artifact {} is missing", artifact.display())]
    MissingUpstream { stage: Stage, artifact: PathBuf },
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: StageFailure,
    },
}

#[derive(Debug, Error)]
pub enum StageFailure {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error(transparent)]
    Firms(#[from] FirmDataError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{}: {reason}", path.display())]
    Artifact { path: PathBuf, reason: String },
    #[error("worker pool: {0}")]
    Pool(String),
}

fn artifact_err(path: &Path) -> impl FnOnce(&dyn fmt::Display) -> StageFailure + '_ {
    move |e| StageFailure::Artifact {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), StageFailure> {
    let mut buf = Vec::new();
    for it in items {
        serde_json::to_writer(&mut buf, it).map_err(|e| artifact_err(path)(&e))?;
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(|e| artifact_err(path)(&e))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StageFailure> {
    let text = fs::read_to_string(path).map_err(|e| artifact_err(path)(&e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| artifact_err(path)(&e)))
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StageFailure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| artifact_err(path)(&e))? + "\n";
    fs::write(path, text).map_err(|e| artifact_err(path)(&e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StageFailure> {
    let text = fs::read_to_string(path).map_err(|e| artifact_err(path)(&e))?;
    serde_json::from_str(&text).map_err(|e| artifact_err(path)(&e))
}

/// CSV with an explicit header, so that empty tables still carry one.
fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), StageFailure> {
    let err = |e: &dyn fmt::Display| artifact_err(path)(e);
    let mut w = csv::Writer::from_path(path).map_err(|e| err(&e))?;
    w.write_record(header).map_err(|e| err(&e))?;
    for r in rows {
        w.write_record(r).map_err(|e| err(&e))?;
    }
    w.flush().map_err(|e| err(&e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Stamp {
    stage: Stage,
    key: String,
    outputs: BTreeMap<String, String>,
}

/// Result of running one stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutcome {
    pub stage: Stage,
    /// The stage was skipped because its inputs were unchanged.
    pub cached: bool,
    /// Output digests keyed by path relative to the output directory.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinIssues {
    pub rejected_rows: Vec<RejectedRow>,
    pub missing_emissions: BTreeMap<String, usize>,
    pub narratives_without_firm: Vec<String>,
    pub firms_without_narrative: Vec<String>,
}

/// Drives stages against one configuration.
pub struct Pipeline {
    cfg: PipelineConfig,
    out: PathBuf,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Self {
        let out = cfg.output_path();
        Pipeline { cfg, out }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn output_dir(&self) -> &Path {
        &self.out
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn stamp_path(&self, stage: Stage) -> PathBuf {
        self.out.join(STAMP_DIR).join(format!("{stage}.stamp.json"))
    }

    fn with_pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T, StageFailure> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.workers)
            .build()
            .map_err(|e| StageFailure::Pool(e.to_string()))?;
        Ok(pool.install(f))
    }

    /// Validates the config, then runs every stage in order.
    pub fn run_all(&self) -> Result<Vec<StageOutcome>, PipelineError> {
        self.cfg.validate()?;
        Stage::ALL.iter().map(|&s| self.run_stage(s)).collect()
    }

    /// Runs one stage against cached upstream artifacts.
    pub fn run_stage(&self, stage: Stage) -> Result<StageOutcome, PipelineError> {
        for name in stage.upstream() {
            let p = self.path(name);
            if !p.is_file() {
                return Err(PipelineError::MissingUpstream { stage, artifact: p });
            }
        }
        let fail = |source: StageFailure| PipelineError::Stage { stage, source };
        let key = self.stage_key(stage).map_err(fail)?;
        if let Some(outputs) = self.cached_outputs(stage, &key) {
            log::info!("{stage}: cached");
            return Ok(StageOutcome {
                stage,
                cached: true,
                outputs,
            });
        }
        fs::create_dir_all(self.out.join(STAMP_DIR))
            .map_err(|e| fail(artifact_err(&self.out)(&e)))?;
        let written = self
            .with_pool(|| self.execute(stage))
            .and_then(|r| r)
            .map_err(fail)?;
        let mut outputs = BTreeMap::new();
        for name in written {
            let digest = sha256_file(&self.path(&name)).map_err(|e| fail(e.into()))?;
            outputs.insert(name, digest);
        }
        let stamp = Stamp {
            stage,
            key,
            outputs: outputs.clone(),
        };
        write_json(&self.stamp_path(stage), &stamp).map_err(fail)?;
        log::info!("{stage}: done, {} outputs", outputs.len());
        Ok(StageOutcome {
            stage,
            cached: false,
            outputs,
        })
    }

    fn cached_outputs(&self, stage: Stage, key: &str) -> Option<BTreeMap<String, String>> {
        let stamp: Stamp = read_json(&self.stamp_path(stage)).ok()?;
        if stamp.key != key || stamp.stage != stage {
            return None;
        }
        let intact = stamp
            .outputs
            .iter()
            .all(|(name, digest)| sha256_file(&self.path(name)).is_ok_and(|d| &d == digest));
        intact.then_some(stamp.outputs)
    }

    /// Digests of the external files a stage reads, keyed for display.
    fn external_inputs(&self, stage: Stage) -> Result<BTreeMap<String, String>, StageFailure> {
        let mut files: Vec<PathBuf> = Vec::new();
        if matches!(stage, Stage::Ingest | Stage::Report) {
            let manifest = self.cfg.manifest_path();
            files.extend(load_manifest(&manifest)?.into_iter().map(|d| d.path));
            files.push(manifest);
        }
        if matches!(stage, Stage::Classify | Stage::Report) {
            let backend = self
                .cfg
                .backend_descriptor()
                .map_err(|e| StageFailure::Artifact {
                    path: PathBuf::from("backend"),
                    reason: e.to_string(),
                })?;
            for p in backend.required_paths() {
                let sidecar = p.with_extension("json");
                if p.extension().is_some_and(|e| e == "onnx") && sidecar.is_file() {
                    files.push(sidecar);
                }
                files.push(p);
            }
        }
        if matches!(stage, Stage::Join | Stage::Report) {
            files.push(self.cfg.firms_path());
        }
        files
            .iter()
            .map(|p| Ok((self.cfg.input_key(p), sha256_file(p)?)))
            .collect()
    }

    fn stage_params(&self, stage: Stage) -> serde_json::Value {
        let c = &self.cfg;
        match stage {
            Stage::Ingest => {
                serde_json::json!({ "min_chars": c.min_chars, "keywords": c.keyword_set() })
            }
            Stage::Classify => serde_json::json!({ "backend": c.backend }),
            Stage::Aggregate => serde_json::json!({ "aggregation": c.aggregation }),
            Stage::Join => serde_json::json!({ "binning": c.binning }),
            Stage::Stats => serde_json::Value::Null,
            Stage::Cluster => serde_json::json!({ "cluster": c.cluster }),
            Stage::Report => c.snapshot(),
        }
    }

    fn stage_key(&self, stage: Stage) -> Result<String, StageFailure> {
        let upstream: BTreeMap<&str, String> = stage
            .upstream()
            .iter()
            .map(|n| Ok((*n, sha256_file(&self.path(n))?)))
            .collect::<Result<_, StageFailure>>()?;
        let material = serde_json::json!({
            "stage": stage,
            "version": env!("CARGO_PKG_VERSION"),
            "params": self.stage_params(stage),
            "upstream": upstream,
            "inputs": self.external_inputs(stage)?,
        });
        Ok(sha256_hex(material.to_string().as_bytes()))
    }

    /// Runs the stage body and returns the artifacts it wrote.
    fn execute(&self, stage: Stage) -> Result<Vec<String>, StageFailure> {
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::Classify => self.classify(),
            Stage::Aggregate => self.aggregate(),
            Stage::Join => self.join(),
            Stage::Stats => self.stats(),
            Stage::Cluster => self.cluster(),
            Stage::Report => self.report(),
        }
    }

    fn ingest(&self) -> Result<Vec<String>, StageFailure> {
        let docs = load_manifest(&self.cfg.manifest_path())?;
        let min_chars = self.cfg.min_chars;
        let extracted: Vec<_> = docs
            .par_iter()
            .map(|d| extract_text(d).map(|t| segment_paragraphs(&d.firm_id, &t, min_chars)))
            .collect();
        let mut paragraphs: Vec<Paragraph> = Vec::new();
        let mut errors = Vec::new();
        let mut empty = Vec::new();
        for (doc, res) in docs.iter().zip(extracted) {
            match res {
                Ok(ps) if ps.is_empty() => empty.push(doc.firm_id.clone()),
                Ok(ps) => paragraphs.extend(ps),
                Err(e) => {
                    log::warn!("firm {}: {e}", doc.firm_id);
                    errors.push(vec![
                        doc.firm_id.clone(),
                        self.cfg.input_key(&doc.path),
                        e.to_string(),
                    ]);
                }
            }
        }
        let outcome = filter_corpus(&paragraphs, &self.cfg.keyword_set());
        // documents with no paragraph at all still get a retention row
        let mut by_firm: BTreeMap<&str, &DocumentRetention> = outcome
            .documents
            .iter()
            .map(|d| (d.firm_id.as_str(), d))
            .collect();
        let zero: Vec<DocumentRetention> = empty
            .iter()
            .map(|f| DocumentRetention {
                firm_id: f.clone(),
                total: 0,
                retained: 0,
                ratio: 0.0,
                flagged: true,
            })
            .collect();
        by_firm.extend(zero.iter().map(|d| (d.firm_id.as_str(), d)));
        let retention: Vec<Vec<String>> = docs
            .iter()
            .filter_map(|d| by_firm.get(d.firm_id.as_str()))
            .map(|r| {
                vec![
                    r.firm_id.clone(),
                    r.total.to_string(),
                    r.retained.to_string(),
                    format!("{:.6}", r.ratio),
                    r.flagged.to_string(),
                ]
            })
            .collect();
        for r in outcome.flagged() {
            log::warn!("firm {}: no climate-relevant paragraph", r.firm_id);
        }
        write_jsonl(&self.path(PARAGRAPHS), &paragraphs)?;
        write_jsonl(&self.path(CLIMATE_PARAGRAPHS), &outcome.retained)?;
        write_csv(
            &self.path(RETENTION),
            &["firm_id", "total", "retained", "ratio", "flagged"],
            &retention,
        )?;
        write_csv(
            &self.path(INGEST_ERRORS),
            &["firm_id", "path", "reason"],
            &errors,
        )?;
        Ok(vec![
            PARAGRAPHS.into(),
            CLIMATE_PARAGRAPHS.into(),
            RETENTION.into(),
            INGEST_ERRORS.into(),
        ])
    }

    fn classify(&self) -> Result<Vec<String>, StageFailure> {
        let climate: Vec<ClimateParagraph> = read_jsonl(&self.path(CLIMATE_PARAGRAPHS))?;
        let paragraphs: Vec<Paragraph> = climate.into_iter().map(|c| c.paragraph).collect();
        let descriptor = self
            .cfg
            .backend_descriptor()
            .map_err(|e| StageFailure::Artifact {
                path: PathBuf::from("backend"),
                reason: e.to_string(),
            })?;
        let labels = classify_batch(&paragraphs, &descriptor)?;
        let records: Vec<LabelRecord> = paragraphs
            .iter()
            .zip(labels)
            .map(|(p, labels)| LabelRecord {
                firm_id: p.firm_id.clone(),
                seq: p.seq,
                labels,
            })
            .collect();
        let path = self.path(LABELS);
        LabelRecord::write_jsonl(&path, &records).map_err(|e| artifact_err(&path)(&e))?;
        Ok(vec![LABELS.into()])
    }

    fn aggregate(&self) -> Result<Vec<String>, StageFailure> {
        let retention_path = self.path(RETENTION);
        let mut reader = csv::Reader::from_path(&retention_path)
            .map_err(|e| artifact_err(&retention_path)(&e))?;
        let mut per_firm: BTreeMap<String, Vec<ParagraphLabels>> = BTreeMap::new();
        for row in reader.records() {
            let row = row.map_err(|e| artifact_err(&retention_path)(&e))?;
            per_firm.entry(row[0].to_string()).or_default();
        }
        let labels_path = self.path(LABELS);
        for rec in LabelRecord::read_jsonl(&labels_path)? {
            per_firm.entry(rec.firm_id).or_default().push(rec.labels);
        }
        let corpus = aggregate_corpus(&per_firm, &self.cfg.aggregation)?;
        write_narratives_csv(&self.path(NARRATIVES), corpus.narratives.values())?;
        let skipped: Vec<Vec<String>> = corpus
            .skipped
            .iter()
            .map(|(f, r)| vec![f.clone(), r.clone()])
            .collect();
        write_csv(&self.path(SKIPPED_FIRMS), &["firm_id", "reason"], &skipped)?;
        Ok(vec![NARRATIVES.into(), SKIPPED_FIRMS.into()])
    }

    fn join(&self) -> Result<Vec<String>, StageFailure> {
        let narratives = read_narratives_csv(&self.path(NARRATIVES))?;
        let table = load_firms(&self.cfg.firms_path())?;
        for r in &table.issues.rejected {
            log::warn!("firms csv line {}: {}", r.line, r.reason);
        }
        let outcome = join(&narratives, &table.firms, &self.cfg.binning)?;
        write_joined_csv(&self.path(JOINED), &outcome.records)?;
        write_json(&self.path(BINS), &outcome.edges)?;
        let issues = JoinIssues {
            rejected_rows: table.issues.rejected,
            missing_emissions: table.issues.missing,
            narratives_without_firm: outcome.narratives_without_firm,
            firms_without_narrative: outcome.firms_without_narrative,
        };
        write_json(&self.path(JOIN_ISSUES), &issues)?;
        Ok(vec![JOINED.into(), BINS.into(), JOIN_ISSUES.into()])
    }

    fn stats(&self) -> Result<Vec<String>, StageFailure> {
        let records = read_joined_csv(&self.path(JOINED))?;
        write_json(&self.path(STATS), &analyze(&records)?)?;
        Ok(vec![STATS.into()])
    }

    fn cluster(&self) -> Result<Vec<String>, StageFailure> {
        let records = read_joined_csv(&self.path(JOINED))?;
        write_json(
            &self.path(CLUSTER),
            &run_clustering(&records, &self.cfg.cluster)?,
        )?;
        Ok(vec![CLUSTER.into()])
    }

    fn report(&self) -> Result<Vec<String>, StageFailure> {
        let stats: StatsBundle = read_json(&self.path(STATS))?;
        let cluster: ClusterReport = read_json(&self.path(CLUSTER))?;
        let edges: BTreeMap<Scope, ScopeEdges> = read_json(&self.path(BINS))?;
        let artifacts = render_all(&stats, &cluster)?;
        let mut outputs = write_artifacts(&self.out, &artifacts)?;
        for name in Stage::Report.upstream() {
            outputs.insert(name.to_string(), sha256_file(&self.path(name))?);
        }
        let manifest = RunManifest::new(
            self.cfg.snapshot(),
            edges,
            self.external_inputs(Stage::Report)?,
            outputs,
        );
        manifest.write(&self.path(MANIFEST))?;
        let mut written: Vec<String> = artifacts.into_iter().map(|a| a.path).collect();
        written.push(MANIFEST.into());
        Ok(written)
    }
}

impl From<io::Error> for StageFailure {
    fn from(e: io::Error) -> Self {
        StageFailure::Artifact {
            path: PathBuf::new(),
            reason: e.to_string(),
        }
    }
}
