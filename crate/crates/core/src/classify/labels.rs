use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ClassifyError;

const SCORE_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Sentiment,
    Commitment,
    Specificity,
    Target,
}

impl Axis {
    pub const ALL: [Axis; 4] = [
        Axis::Sentiment,
        Axis::Commitment,
        Axis::Specificity,
        Axis::Target,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Sentiment => "sentiment",
            Axis::Commitment => "commitment",
            Axis::Specificity => "specificity",
            Axis::Target => "target",
        }
    }

    /// Label names in declared order.
    pub fn label_names(self) -> &'static [&'static str] {
        match self {
            Axis::Sentiment => Sentiment::NAMES,
            Axis::Commitment => Commitment::NAMES,
            Axis::Specificity => Specificity::NAMES,
            Axis::Target => Target::NAMES,
        }
    }

    pub fn label_count(self) -> usize {
        self.label_names().len()
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A per-axis label enum with a fixed declared order.
pub trait AxisLabel: Copy + Eq + fmt::Debug + 'static {
    const AXIS: Axis;
    const ALL: &'static [Self];
    const NAMES: &'static [&'static str];

    fn index(self) -> usize {
        Self::ALL
            .iter()
            .position(|&l| l == self)
            .expect("label in ALL")
    }

    fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    fn as_str(self) -> &'static str {
        Self::NAMES[self.index()]
    }

    fn parse(name: &str) -> Option<Self> {
        Self::NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| Self::ALL[i])
    }
}

macro_rules! axis_label {
    ($name:ident, $axis:expr, [$($variant:ident => $text:literal),+ $(,)?]) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl AxisLabel for $name {
            const AXIS: Axis = $axis;
            const ALL: &'static [Self] = &[$($name::$variant),+];
            const NAMES: &'static [&'static str] = &[$($text),+];
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(AxisLabel::as_str(*self))
            }
        }
    };
}

axis_label!(Sentiment, Axis::Sentiment, [
    Risk => "risk",
    Neutral => "neutral",
    Opportunity => "opportunity",
]);
axis_label!(Commitment, Axis::Commitment, [
    Commitment => "commitment",
    NoCommitment => "no_commitment",
]);
axis_label!(Specificity, Axis::Specificity, [
    Specific => "specific",
    General => "general",
]);
axis_label!(Target, Axis::Target, [
    Netzero => "netzero",
    Reduction => "reduction",
    NoTarget => "no_target",
]);

/// Classifier verdicts for one paragraph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "LabelsWire", try_from = "LabelsWire")]
pub struct ParagraphLabels {
    pub sentiment: Sentiment,
    pub commitment: Commitment,
    pub specificity: Specificity,
    pub target: Target,
    /// Probability vector per axis, in declared label order.
    pub scores: BTreeMap<Axis, Vec<f64>>,
    /// The paragraph was cut to the model's maximum sequence length.
    pub truncated: bool,
}

impl ParagraphLabels {
    /// Derives labels as the per-axis argmax of `scores`. Ties go to the first
    /// label in declared order and are logged.
    pub fn from_scores(scores: BTreeMap<Axis, Vec<f64>>) -> Result<Self, ClassifyError> {
        let mut picked = [0usize; 4];
        for (slot, axis) in Axis::ALL.iter().enumerate() {
            let probs = scores
                .get(axis)
                .ok_or_else(|| ClassifyError::InvalidScores(format!("missing {axis} scores")))?;
            check_probabilities(*axis, probs)?;
            let (best, tied) = argmax(probs);
            if tied {
                log::debug!(
                    "tie on {axis} scores {probs:?}; taking {}",
                    axis.label_names()[best]
                );
            }
            picked[slot] = best;
        }
        Ok(ParagraphLabels {
            sentiment: Sentiment::from_index(picked[0]).expect("checked length"),
            commitment: Commitment::from_index(picked[1]).expect("checked length"),
            specificity: Specificity::from_index(picked[2]).expect("checked length"),
            target: Target::from_index(picked[3]).expect("checked length"),
            scores,
            truncated: false,
        })
    }

    /// Labels with one-hot scores.
    pub fn one_hot(
        sentiment: Sentiment,
        commitment: Commitment,
        specificity: Specificity,
        target: Target,
    ) -> Self {
        fn hot<L: AxisLabel>(label: L) -> Vec<f64> {
            let mut v = vec![0.0; L::ALL.len()];
            v[label.index()] = 1.0;
            v
        }
        let scores = BTreeMap::from([
            (Axis::Sentiment, hot(sentiment)),
            (Axis::Commitment, hot(commitment)),
            (Axis::Specificity, hot(specificity)),
            (Axis::Target, hot(target)),
        ]);
        ParagraphLabels {
            sentiment,
            commitment,
            specificity,
            target,
            scores,
            truncated: false,
        }
    }

    pub fn label_index(&self, axis: Axis) -> usize {
        match axis {
            Axis::Sentiment => self.sentiment.index(),
            Axis::Commitment => self.commitment.index(),
            Axis::Specificity => self.specificity.index(),
            Axis::Target => self.target.index(),
        }
    }

    /// Probability of the stored label on `axis`.
    pub fn confidence(&self, axis: Axis) -> f64 {
        self.scores
            .get(&axis)
            .and_then(|s| s.get(self.label_index(axis)).copied())
            .unwrap_or(0.0)
    }

    /// Checks score normalization and argmax agreement.
    pub fn validate(&self) -> Result<(), ClassifyError> {
        for axis in Axis::ALL {
            let probs = self
                .scores
                .get(&axis)
                .ok_or_else(|| ClassifyError::InvalidScores(format!("missing {axis} scores")))?;
            check_probabilities(axis, probs)?;
            let (best, _) = argmax(probs);
            if best != self.label_index(axis) {
                return Err(ClassifyError::InvalidScores(format!(
                    "{axis} label {} is not the argmax of {probs:?}",
                    axis.label_names()[self.label_index(axis)]
                )));
            }
        }
        Ok(())
    }
}

fn check_probabilities(axis: Axis, probs: &[f64]) -> Result<(), ClassifyError> {
    if probs.len() != axis.label_count() {
        return Err(ClassifyError::InvalidScores(format!(
            "{axis} expects {} scores, got {}",
            axis.label_count(),
            probs.len()
        )));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(ClassifyError::InvalidScores(format!(
            "{axis} scores {probs:?} are not probabilities"
        )));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SCORE_SUM_TOLERANCE {
        return Err(ClassifyError::InvalidScores(format!(
            "{axis} scores sum to {sum}"
        )));
    }
    Ok(())
}

/// Index of the maximum; the first one wins ties. Also reports whether a tie
/// occurred at the maximum.
pub(crate) fn argmax(values: &[f64]) -> (usize, bool) {
    let mut best = 0;
    let mut tied = false;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
            tied = false;
        } else if v == values[best] {
            tied = true;
        }
    }
    (best, tied)
}

/// Softmax in f64.
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[derive(Serialize, Deserialize)]
struct AxisLabelsWire {
    sentiment: Sentiment,
    commitment: Commitment,
    specificity: Specificity,
    target: Target,
}

#[derive(Serialize, Deserialize)]
struct LabelsWire {
    labels: AxisLabelsWire,
    scores: BTreeMap<Axis, Vec<f64>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    truncated: bool,
}

impl From<ParagraphLabels> for LabelsWire {
    fn from(l: ParagraphLabels) -> Self {
        LabelsWire {
            labels: AxisLabelsWire {
                sentiment: l.sentiment,
                commitment: l.commitment,
                specificity: l.specificity,
                target: l.target,
            },
            scores: l.scores,
            truncated: l.truncated,
        }
    }
}

impl TryFrom<LabelsWire> for ParagraphLabels {
    type Error = ClassifyError;

    fn try_from(w: LabelsWire) -> Result<Self, Self::Error> {
        let labels = ParagraphLabels {
            sentiment: w.labels.sentiment,
            commitment: w.labels.commitment,
            specificity: w.labels.specificity,
            target: w.labels.target,
            scores: w.scores,
            truncated: w.truncated,
        };
        labels.validate()?;
        Ok(labels)
    }
}
