//! Report-level labels from per-paragraph labels.
//!
//! A firm's report gets ratios over its classified climate paragraphs, then
//! four global labels by thresholding those ratios.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{Axis, Commitment, ParagraphLabels, Sentiment, Specificity, Target};

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("firm {0} has no classified paragraphs")]
    EmptyReport(String),
    #[error("invalid aggregation config: {0}")]
    InvalidConfig(String),
    #[error("narratives file {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregationConfig {
    pub sentiment_threshold: f64,
    pub commitment_threshold: f64,
    pub specificity_threshold: f64,
    pub target_threshold: f64,
    /// `ratio > t` when true, `ratio >= t` otherwise.
    pub strict_inequality: bool,
    /// Compatibility mode: a lone net-zero majority yields `reduction` and a
    /// lone reduction majority yields `netzero`.
    pub swapped_target_mapping: bool,
    /// Paragraphs whose confidence on any axis falls below this value are
    /// left out of the ratios. 0 keeps everything.
    pub min_confidence: f64,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig {
            sentiment_threshold: 0.30,
            commitment_threshold: 0.40,
            specificity_threshold: 0.40,
            target_threshold: 0.30,
            strict_inequality: true,
            swapped_target_mapping: false,
            min_confidence: 0.0,
        }
    }
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<(), AggregateError> {
        for (name, t) in [
            ("sentiment_threshold", self.sentiment_threshold),
            ("commitment_threshold", self.commitment_threshold),
            ("specificity_threshold", self.specificity_threshold),
            ("target_threshold", self.target_threshold),
        ] {
            if !(t > 0.0 && t < 1.0) {
                return Err(AggregateError::InvalidConfig(format!(
                    "{name} = {t} is outside (0, 1)"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(AggregateError::InvalidConfig(format!(
                "min_confidence = {} is outside [0, 1]",
                self.min_confidence
            )));
        }
        Ok(())
    }

    fn exceeds(&self, ratio: f64, threshold: f64) -> bool {
        if self.strict_inequality {
            ratio > threshold
        } else {
            ratio >= threshold
        }
    }
}

/// Shares of classified paragraphs carrying each label.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Ratios {
    pub risk: f64,
    pub opportunity: f64,
    pub commitment: f64,
    pub specific: f64,
    pub netzero: f64,
    pub reduction: f64,
}

impl Ratios {
    /// Ratios over `labels`, returned with the paragraph count used.
    pub fn from_labels(labels: &[ParagraphLabels], min_confidence: f64) -> (Ratios, usize) {
        let kept: Vec<&ParagraphLabels> = labels
            .iter()
            .filter(|l| Axis::ALL.iter().all(|&a| l.confidence(a) >= min_confidence))
            .collect();
        let n = kept.len();
        if n == 0 {
            return (Ratios::default(), 0);
        }
        let share = |pred: &dyn Fn(&ParagraphLabels) -> bool| {
            kept.iter().filter(|l| pred(l)).count() as f64 / n as f64
        };
        let ratios = Ratios {
            risk: share(&|l| l.sentiment == Sentiment::Risk),
            opportunity: share(&|l| l.sentiment == Sentiment::Opportunity),
            commitment: share(&|l| l.commitment == Commitment::Commitment),
            specific: share(&|l| l.specificity == Specificity::Specific),
            netzero: share(&|l| l.target == Target::Netzero),
            reduction: share(&|l| l.target == Target::Reduction),
        };
        (ratios, n)
    }
}

macro_rules! global_label {
    ($(#[$doc:meta])* $name:ident { $($variant:ident => $text:literal = $code:literal),+ $(,)? }) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            /// Integer code used by the ordinal statistics.
            pub fn code(self) -> i64 {
                match self {
                    $($name::$variant => $code),+
                }
            }

            pub fn from_code(code: i64) -> Option<Self> {
                match code {
                    $($code => Some($name::$variant),)+
                    _ => None,
                }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s {
                    $($text => Some($name::$variant),)+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

global_label!(
    /// Report sentiment, coded from most risk-oriented to most opportunity-oriented.
    SentimentGlobal {
        Risk => "risk" = 0,
        RiskOpportunity => "risk_opportunity" = 1,
        Neutral => "neutral" = 2,
        Opportunity => "opportunity" = 3,
    }
);
global_label!(CommitmentGlobal {
    NoCommitment => "no_commitment" = 0,
    Commitment => "commitment" = 1,
});
global_label!(SpecificityGlobal {
    General => "general" = 0,
    Specific => "specific" = 1,
});
global_label!(TargetGlobal {
    NoReduction => "no_reduction" = 0,
    Reduction => "reduction" = 1,
    ReductionNetzero => "reduction_netzero" = 2,
    Netzero => "netzero" = 3,
});

/// The four global labels of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GlobalLabels {
    pub sentiment: SentimentGlobal,
    pub commitment: CommitmentGlobal,
    pub specificity: SpecificityGlobal,
    pub target: TargetGlobal,
}

/// The threshold rules: a pure function of the ratios.
pub fn labels_from_ratios(r: &Ratios, cfg: &AggregationConfig) -> GlobalLabels {
    let risk = cfg.exceeds(r.risk, cfg.sentiment_threshold);
    let opp = cfg.exceeds(r.opportunity, cfg.sentiment_threshold);
    let sentiment = match (risk, opp) {
        (true, true) => SentimentGlobal::RiskOpportunity,
        (true, false) => SentimentGlobal::Risk,
        (false, true) => SentimentGlobal::Opportunity,
        (false, false) => SentimentGlobal::Neutral,
    };
    let commitment = if cfg.exceeds(r.commitment, cfg.commitment_threshold) {
        CommitmentGlobal::Commitment
    } else {
        CommitmentGlobal::NoCommitment
    };
    let specificity = if cfg.exceeds(r.specific, cfg.specificity_threshold) {
        SpecificityGlobal::Specific
    } else {
        SpecificityGlobal::General
    };
    let nz = cfg.exceeds(r.netzero, cfg.target_threshold);
    let red = cfg.exceeds(r.reduction, cfg.target_threshold);
    let target = match (nz, red, cfg.swapped_target_mapping) {
        (true, true, _) => TargetGlobal::ReductionNetzero,
        (true, false, false) | (false, true, true) => TargetGlobal::Netzero,
        (false, true, false) | (true, false, true) => TargetGlobal::Reduction,
        (false, false, _) => TargetGlobal::NoReduction,
    };
    GlobalLabels {
        sentiment,
        commitment,
        specificity,
        target,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportNarrative {
    pub firm_id: String,
    pub ratios: Ratios,
    pub sentiment_global: SentimentGlobal,
    pub commitment_global: CommitmentGlobal,
    pub specificity_global: SpecificityGlobal,
    pub netzero_global: TargetGlobal,
    pub n_paragraphs: usize,
}

impl ReportNarrative {
    pub fn globals(&self) -> GlobalLabels {
        GlobalLabels {
            sentiment: self.sentiment_global,
            commitment: self.commitment_global,
            specificity: self.specificity_global,
            target: self.netzero_global,
        }
    }
}

pub fn aggregate(
    firm_id: &str,
    labels: &[ParagraphLabels],
    cfg: &AggregationConfig,
) -> Result<ReportNarrative, AggregateError> {
    cfg.validate()?;
    let (ratios, n) = Ratios::from_labels(labels, cfg.min_confidence);
    if n == 0 {
        return Err(AggregateError::EmptyReport(firm_id.to_string()));
    }
    let g = labels_from_ratios(&ratios, cfg);
    Ok(ReportNarrative {
        firm_id: firm_id.to_string(),
        ratios,
        sentiment_global: g.sentiment,
        commitment_global: g.commitment,
        specificity_global: g.specificity,
        netzero_global: g.target,
        n_paragraphs: n,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusNarratives {
    pub narratives: BTreeMap<String, ReportNarrative>,
    /// Firms without classified paragraphs, with the reason.
    pub skipped: Vec<(String, String)>,
}

/// Aggregates every firm; firms without classified paragraphs go to the skip
/// list.
pub fn aggregate_corpus(
    per_firm: &BTreeMap<String, Vec<ParagraphLabels>>,
    cfg: &AggregationConfig,
) -> Result<CorpusNarratives, AggregateError> {
    cfg.validate()?;
    let results: Vec<_> = per_firm
        .par_iter()
        .map(|(firm, labels)| (firm, aggregate(firm, labels, cfg)))
        .collect();
    let mut out = CorpusNarratives::default();
    for (firm, res) in results {
        match res {
            Ok(n) => {
                out.narratives.insert(firm.clone(), n);
            }
            Err(AggregateError::EmptyReport(_)) => {
                log::warn!("firm {firm}: no classified climate paragraphs, skipped");
                out.skipped
                    .push((firm.clone(), "no classified paragraphs".into()));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct NarrativeRow {
    firm_id: String,
    n_paragraphs: usize,
    risk: f64,
    opportunity: f64,
    commitment: f64,
    specific: f64,
    netzero: f64,
    reduction: f64,
    sentiment_global: SentimentGlobal,
    commitment_global: CommitmentGlobal,
    specificity_global: SpecificityGlobal,
    netzero_global: TargetGlobal,
}

pub fn write_narratives_csv<'a>(
    path: &Path,
    narratives: impl IntoIterator<Item = &'a ReportNarrative>,
) -> Result<(), AggregateError> {
    let io = |e: &dyn fmt::Display| AggregateError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| io(&e))?;
    for n in narratives {
        w.serialize(NarrativeRow {
            firm_id: n.firm_id.clone(),
            n_paragraphs: n.n_paragraphs,
            risk: n.ratios.risk,
            opportunity: n.ratios.opportunity,
            commitment: n.ratios.commitment,
            specific: n.ratios.specific,
            netzero: n.ratios.netzero,
            reduction: n.ratios.reduction,
            sentiment_global: n.sentiment_global,
            commitment_global: n.commitment_global,
            specificity_global: n.specificity_global,
            netzero_global: n.netzero_global,
        })
        .map_err(|e| io(&e))?;
    }
    w.flush().map_err(|e| io(&e))
}

pub fn read_narratives_csv(path: &Path) -> Result<Vec<ReportNarrative>, AggregateError> {
    let io = |e: &dyn fmt::Display| AggregateError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| io(&e))?;
    r.deserialize::<NarrativeRow>()
        .map(|row| {
            let row = row.map_err(|e| io(&e))?;
            Ok(ReportNarrative {
                firm_id: row.firm_id,
                ratios: Ratios {
                    risk: row.risk,
                    opportunity: row.opportunity,
                    commitment: row.commitment,
                    specific: row.specific,
                    netzero: row.netzero,
                    reduction: row.reduction,
                },
                sentiment_global: row.sentiment_global,
                commitment_global: row.commitment_global,
                specificity_global: row.specificity_global,
                netzero_global: row.netzero_global,
                n_paragraphs: row.n_paragraphs,
            })
        })
        .collect()
}
