//! Replays precomputed labels from a JSON-lines file keyed by
//! `(firm_id, seq)`. The classify stage writes the same format.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::labels::ParagraphLabels;
use super::{ClassifyError, ParagraphClassifier};
use crate::corpus::Paragraph;

/// One line of a labels file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub firm_id: String,
    pub seq: usize,
    #[serde(flatten)]
    pub labels: ParagraphLabels,
}

impl LabelRecord {
    pub fn read_jsonl(path: &Path) -> Result<Vec<LabelRecord>, ClassifyError> {
        let invalid = |line: usize, reason: String| ClassifyError::InvalidFixture {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let text = fs::read_to_string(path).map_err(|e| invalid(0, e.to_string()))?;
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: LabelRecord =
                serde_json::from_str(line).map_err(|e| invalid(i + 1, e.to_string()))?;
            out.push(rec);
        }
        Ok(out)
    }

    pub fn write_jsonl(path: &Path, records: &[LabelRecord]) -> std::io::Result<()> {
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r)?;
            buf.write_all(b"\n")?;
        }
        fs::write(path, buf)
    }
}

#[derive(Debug, Clone)]
pub struct FixtureClassifier {
    path: PathBuf,
    labels: HashMap<(String, usize), ParagraphLabels>,
}

impl FixtureClassifier {
    pub fn load(path: &Path) -> Result<Self, ClassifyError> {
        let records = LabelRecord::read_jsonl(path)?;
        Ok(Self::from_records(path, records))
    }

    pub fn from_records(path: &Path, records: Vec<LabelRecord>) -> Self {
        let labels = records
            .into_iter()
            .map(|r| ((r.firm_id, r.seq), r.labels))
            .collect();
        FixtureClassifier {
            path: path.to_path_buf(),
            labels,
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl ParagraphClassifier for FixtureClassifier {
    fn classify(&self, paragraph: &Paragraph) -> Result<ParagraphLabels, ClassifyError> {
        self.labels
            .get(&(paragraph.firm_id.clone(), paragraph.seq))
            .cloned()
            .ok_or_else(|| ClassifyError::FixtureMiss {
                firm_id: paragraph.firm_id.clone(),
                seq: paragraph.seq,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{classify_batch, stub_classify, BackendDescriptor};

    #[test]
    fn round_trip_and_miss() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.jsonl");
        let texts = ["we commit to net zero", "risk of stranded assets"];
        let records: Vec<_> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| LabelRecord {
                firm_id: "A".into(),
                seq: i,
                labels: stub_classify(t),
            })
            .collect();
        LabelRecord::write_jsonl(&path, &records).unwrap();
        assert_eq!(LabelRecord::read_jsonl(&path).unwrap(), records);

        let paras: Vec<_> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Paragraph {
                firm_id: "A".into(),
                seq: i,
                text: t.to_string(),
                char_len: t.len(),
            })
            .collect();
        let got = classify_batch(&paras, &BackendDescriptor::fixture(&path)).unwrap();
        assert_eq!(got[1], records[1].labels);

        let mut missing = paras[0].clone();
        missing.seq = 9;
        let err = classify_batch(&[missing], &BackendDescriptor::fixture(&path)).unwrap_err();
        assert!(matches!(err, ClassifyError::FixtureMiss { seq: 9, .. }));
    }

    #[test]
    fn bad_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.jsonl");
        fs::write(&path, "\n{\"firm_id\":\"A\"}\n").unwrap();
        match FixtureClassifier::load(&path) {
            Err(ClassifyError::InvalidFixture { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
