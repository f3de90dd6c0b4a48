//! Document loading and paragraph segmentation.
//!
//! Documents are either plain text (decoded leniently to UTF-8) or PDF. PDF
//! text is walked page by page; a blank line separates layout blocks so that
//! both formats share one paragraph rule: a paragraph is a run of non-blank
//! lines.

mod pdf;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default minimum paragraph length in characters.
pub const DEFAULT_MIN_CHARS: usize = 20;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },
    #[error("unsupported document format: {0}")]
    UnsupportedFormat(PathBuf),
    #[error("no extractable text in {0}")]
    EmptyDocument(PathBuf),
    #[error("invalid document reference: {0}")]
    InvalidDocument(String),
    #[error("document manifest {path}, line {line}: {reason}")]
    Manifest {
        path: PathBuf,
        line: u64,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentKind {
    SustainabilityReport,
    AnnualReport,
    Other,
}

impl DocumentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DocumentKind::SustainabilityReport => "sustainability_report",
            DocumentKind::AnnualReport => "annual_report",
            DocumentKind::Other => "other",
        }
    }
}

impl fmt::Display for DocumentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DocumentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sustainability_report" | "sustainability" | "esg" => {
                Ok(DocumentKind::SustainabilityReport)
            }
            "annual_report" | "annual" => Ok(DocumentKind::AnnualReport),
            "other" => Ok(DocumentKind::Other),
            other => Err(format!("unknown document kind `{other}`")),
        }
    }
}

/// One source document for a firm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRef {
    pub firm_id: String,
    pub path: PathBuf,
    pub doc_year: i32,
    pub kind: DocumentKind,
}

impl DocumentRef {
    pub fn new(
        firm_id: impl Into<String>,
        path: impl Into<PathBuf>,
        doc_year: i32,
        kind: DocumentKind,
    ) -> Result<Self, IngestError> {
        let doc = DocumentRef {
            firm_id: firm_id.into(),
            path: path.into(),
            doc_year,
            kind,
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.firm_id.trim().is_empty() {
            return Err(IngestError::InvalidDocument("empty firm_id".into()));
        }
        if !(2000..=2100).contains(&self.doc_year) {
            return Err(IngestError::InvalidDocument(format!(
                "doc_year {} outside [2000, 2100] for firm {}",
                self.doc_year, self.firm_id
            )));
        }
        Ok(())
    }
}

/// A candidate paragraph. `text` is whitespace-normalized and trimmed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub firm_id: String,
    pub seq: usize,
    pub text: String,
    pub char_len: usize,
}

/// Reads the text of a document. Plain text is passed through with invalid
/// byte sequences replaced by U+FFFD; PDFs are extracted page by page.
pub fn extract_text(doc: &DocumentRef) -> Result<String, IngestError> {
    let path = &doc.path;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let bytes = match ext.as_deref() {
        Some("txt") | Some("text") | Some("pdf") => {
            fs::read(path).map_err(|e| IngestError::UnreadableFile {
                path: path.clone(),
                reason: e.to_string(),
            })?
        }
        _ => return Err(IngestError::UnsupportedFormat(path.clone())),
    };
    let text = if ext.as_deref() == Some("pdf") {
        pdf::extract(&bytes).map_err(|reason| IngestError::UnreadableFile {
            path: path.clone(),
            reason,
        })?
    } else {
        decode_text_bytes(&bytes)
    };
    if text.trim().is_empty() {
        return Err(IngestError::EmptyDocument(path.clone()));
    }
    Ok(text)
}

fn decode_text_bytes(bytes: &[u8]) -> String {
    if let Some(rest) = bytes.strip_prefix(&[0xEF, 0xBB, 0xBF]) {
        return String::from_utf8_lossy(rest).into_owned();
    }
    if let Some(rest) = bytes.strip_prefix(&[0xFF, 0xFE]) {
        let units: Vec<u16> = rest
            .chunks(2)
            .map(|c| u16::from_le_bytes([c[0], *c.get(1).unwrap_or(&0)]))
            .collect();
        return String::from_utf16_lossy(&units);
    }
    if let Some(rest) = bytes.strip_prefix(&[0xFE, 0xFF]) {
        let units: Vec<u16> = rest
            .chunks(2)
            .map(|c| u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)]))
            .collect();
        return String::from_utf16_lossy(&units);
    }
    String::from_utf8_lossy(bytes).into_owned()
}

/// Splits text into paragraphs at blank lines.
///
/// Internal whitespace runs collapse to a single space and fragments shorter
/// than `min_chars` characters are dropped. Sequence numbers are dense from 0.
/// A `min_chars` of 0 behaves like 1.
pub fn segment_paragraphs(firm_id: &str, text: &str, min_chars: usize) -> Vec<Paragraph> {
    let mut paragraphs = Vec::new();
    let mut words: Vec<&str> = Vec::new();
    let flush = |words: &mut Vec<&str>, paragraphs: &mut Vec<Paragraph>| {
        if words.is_empty() {
            return;
        }
        let text = words.join(" ");
        words.clear();
        let char_len = text.chars().count();
        if char_len >= min_chars.max(1) {
            paragraphs.push(Paragraph {
                firm_id: firm_id.to_string(),
                seq: paragraphs.len(),
                text,
                char_len,
            });
        }
    };
    for line in text.lines() {
        if line.trim().is_empty() {
            flush(&mut words, &mut paragraphs);
        } else {
            words.extend(line.split_whitespace());
        }
    }
    flush(&mut words, &mut paragraphs);
    paragraphs
}

/// Joins paragraphs back into text using blank-line separators.
pub fn join_paragraphs(paragraphs: &[Paragraph]) -> String {
    paragraphs
        .iter()
        .map(|p| p.text.as_str())
        .collect::<Vec<_>>()
        .join("\n\n")
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    firm_id: String,
    path: String,
    doc_year: i32,
    kind: String,
}

/// Loads the document manifest (`firm_id,path,doc_year,kind`). Relative paths
/// resolve against the manifest's directory. One document per firm.
pub fn load_manifest(path: &Path) -> Result<Vec<DocumentRef>, IngestError> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| IngestError::UnreadableFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for (idx, row) in reader.deserialize::<ManifestRow>().enumerate() {
        // header is line 1
        let line = idx as u64 + 2;
        let err = |reason: String| IngestError::Manifest {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let row = row.map_err(|e| err(e.to_string()))?;
        let kind: DocumentKind = row.kind.parse().map_err(err)?;
        let doc_path = PathBuf::from(&row.path);
        let doc_path = if doc_path.is_absolute() {
            doc_path
        } else {
            base.join(doc_path)
        };
        let doc = DocumentRef::new(row.firm_id, doc_path, row.doc_year, kind)
            .map_err(|e| err(e.to_string()))?;
        if !seen.insert(doc.firm_id.clone()) {
            return Err(err(format!("duplicate firm_id `{}`", doc.firm_id)));
        }
        docs.push(doc);
    }
    Ok(docs)
}
