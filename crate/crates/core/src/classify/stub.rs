//! Deterministic rule-based classifier for tests and offline runs.
//!
//! Rules, applied to the normalized text (lowercase, collapsed whitespace):
//! * sentiment: risk cues without opportunity cues give `risk`, the reverse
//!   gives `opportunity`; otherwise the side with more distinct cues wins and
//!   an even count is `neutral`.
//! * commitment: any commitment cue.
//! * specificity: any ASCII digit or a percent sign.
//! * target: a net-zero cue gives `netzero`, else a reduction cue gives
//!   `reduction`, else `no_target`.

use super::labels::{Commitment, ParagraphLabels, Sentiment, Specificity, Target};
use super::{ClassifyError, ParagraphClassifier};
use crate::corpus::Paragraph;
use crate::keywords::normalize;

const RISK_CUES: &[&str] = &[
    "risk", "threat", "stranded", "damage", "hazard", "flood", "drought", "exposure", "loss",
];
const OPPORTUNITY_CUES: &[&str] = &[
    "opportunit",
    "grow",
    "benefit",
    "revenue",
    "advantage",
    "innovation",
];
const COMMITMENT_CUES: &[&str] = &[
    "commit",
    "pledge",
    "we will",
    "we aim",
    "we intend",
    "we are determined",
];
const NETZERO_CUES: &[&str] = &["net zero", "net-zero", "netzero", "carbon neutral"];
const REDUCTION_CUES: &[&str] = &["reduc", "cut ", "cutting", "decrease", "lower our"];

fn hits(text: &str, cues: &[&str]) -> usize {
    cues.iter().filter(|c| text.contains(*c)).count()
}

/// Classifies one text with the stub rules.
pub fn stub_classify(text: &str) -> ParagraphLabels {
    let t = normalize(text);
    let risk = hits(&t, RISK_CUES);
    let opp = hits(&t, OPPORTUNITY_CUES);
    let sentiment = match risk.cmp(&opp) {
        std::cmp::Ordering::Greater => Sentiment::Risk,
        std::cmp::Ordering::Less => Sentiment::Opportunity,
        std::cmp::Ordering::Equal => Sentiment::Neutral,
    };
    let commitment = if hits(&t, COMMITMENT_CUES) > 0 {
        Commitment::Commitment
    } else {
        Commitment::NoCommitment
    };
    let specificity = if t.bytes().any(|b| b.is_ascii_digit() || b == b'%') {
        Specificity::Specific
    } else {
        Specificity::General
    };
    let target = if hits(&t, NETZERO_CUES) > 0 {
        Target::Netzero
    } else if hits(&t, REDUCTION_CUES) > 0 {
        Target::Reduction
    } else {
        Target::NoTarget
    };
    ParagraphLabels::one_hot(sentiment, commitment, specificity, target)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StubClassifier;

impl ParagraphClassifier for StubClassifier {
    fn classify(&self, paragraph: &Paragraph) -> Result<ParagraphLabels, ClassifyError> {
        Ok(stub_classify(&paragraph.text))
    }
}
