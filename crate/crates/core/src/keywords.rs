//! Rule-based climate relevance filter.
//!
//! A paragraph is climate-relevant when its normalized text contains at least
//! one phrase from any keyword group. Matching is plain substring search after
//! lowercasing, whitespace collapsing and folding of CO2 spellings (`CO₂`,
//! `CO_2`, `co2`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Paragraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeywordGroup {
    GreenhouseGases,
    EmissionScopes,
    TargetsNeutrality,
    StrategyRisks,
}

impl KeywordGroup {
    pub const ALL: [KeywordGroup; 4] = [
        KeywordGroup::GreenhouseGases,
        KeywordGroup::EmissionScopes,
        KeywordGroup::TargetsNeutrality,
        KeywordGroup::StrategyRisks,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KeywordGroup::GreenhouseGases => "greenhouse_gases",
            KeywordGroup::EmissionScopes => "emission_scopes",
            KeywordGroup::TargetsNeutrality => "targets_neutrality",
            KeywordGroup::StrategyRisks => "strategy_risks",
        }
    }
}

impl fmt::Display for KeywordGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum KeywordError {
    #[error("keyword group {0} contains an empty phrase")]
    EmptyPhrase(KeywordGroup),
    #[error("keyword `{phrase}` in group {group} is not lowercase")]
    NotLowercase { group: KeywordGroup, phrase: String },
}

/// Keyword phrases per group. All phrases are lowercase and non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(
    try_from = "BTreeMap<KeywordGroup, Vec<String>>",
    into = "BTreeMap<KeywordGroup, Vec<String>>"
)]
pub struct KeywordSet {
    groups: BTreeMap<KeywordGroup, Vec<String>>,
    // normalized phrases, parallel to `groups`
    normalized: BTreeMap<KeywordGroup, Vec<String>>,
}

impl KeywordSet {
    pub fn new(groups: BTreeMap<KeywordGroup, Vec<String>>) -> Result<Self, KeywordError> {
        for (&group, phrases) in &groups {
            for phrase in phrases {
                if phrase.trim().is_empty() {
                    return Err(KeywordError::EmptyPhrase(group));
                }
                if phrase.to_lowercase() != *phrase {
                    return Err(KeywordError::NotLowercase {
                        group,
                        phrase: phrase.clone(),
                    });
                }
            }
        }
        let normalized = groups
            .iter()
            .map(|(&g, phrases)| (g, phrases.iter().map(|p| normalize(p)).collect()))
            .collect();
        Ok(KeywordSet { groups, normalized })
    }

    pub fn groups(&self) -> &BTreeMap<KeywordGroup, Vec<String>> {
        &self.groups
    }

    /// Returns a copy with `phrase` appended to `group`.
    pub fn with_phrase(&self, group: KeywordGroup, phrase: &str) -> Result<Self, KeywordError> {
        let mut groups = self.groups.clone();
        groups.entry(group).or_default().push(phrase.to_string());
        KeywordSet::new(groups)
    }

    /// Groups with at least one phrase occurring in `text`.
    pub fn match_text(&self, text: &str) -> BTreeSet<KeywordGroup> {
        let haystack = normalize(text);
        self.normalized
            .iter()
            .filter(|(_, phrases)| phrases.iter().any(|p| haystack.contains(p.as_str())))
            .map(|(&g, _)| g)
            .collect()
    }
}

impl Default for KeywordSet {
    fn default() -> Self {
        // "emission scopes" is both a group name and listed as a phrase.
        let table: [(KeywordGroup, &[&str]); 4] = [
            (
                KeywordGroup::GreenhouseGases,
                &["co2", "co_2", "ghg", "greenhouse gas", "carbon footprint"],
            ),
            (
                KeywordGroup::EmissionScopes,
                &["scope 1", "scope 2", "scope 3", "emission scopes"],
            ),
            (
                KeywordGroup::TargetsNeutrality,
                &[
                    "net zero",
                    "carbon neutrality",
                    "emission reduction",
                    "zero emission",
                    "overall emissions",
                    "cutting emissions",
                    "emissions footprint",
                    "climate target",
                ],
            ),
            (
                KeywordGroup::StrategyRisks,
                &[
                    "decarbonization",
                    "climate strategy",
                    "transition risk",
                    "carbon intensity",
                    "climate change",
                    "emission from",
                    "direct emission",
                ],
            ),
        ];
        let groups = table
            .iter()
            .map(|(g, phrases)| (*g, phrases.iter().map(|p| p.to_string()).collect()))
            .collect();
        KeywordSet::new(groups).expect("built-in keyword list is valid")
    }
}

impl TryFrom<BTreeMap<KeywordGroup, Vec<String>>> for KeywordSet {
    type Error = KeywordError;

    fn try_from(groups: BTreeMap<KeywordGroup, Vec<String>>) -> Result<Self, Self::Error> {
        KeywordSet::new(groups)
    }
}

impl From<KeywordSet> for BTreeMap<KeywordGroup, Vec<String>> {
    fn from(set: KeywordSet) -> Self {
        set.groups
    }
}

/// Lowercases, collapses whitespace and folds subscript digits and `co_2`.
pub fn normalize(text: &str) -> String {
    let lowered: String = text
        .to_lowercase()
        .chars()
        .map(|c| match c {
            '₀'..='₉' => char::from_digit(c as u32 - '₀' as u32, 10).unwrap_or(c),
            _ => c,
        })
        .collect();
    lowered
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .replace("co_2", "co2")
}

/// Keyword groups matched by a paragraph.
pub fn matches(paragraph: &Paragraph, keywords: &KeywordSet) -> BTreeSet<KeywordGroup> {
    keywords.match_text(&paragraph.text)
}

/// A retained paragraph with the groups that matched it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClimateParagraph {
    #[serde(flatten)]
    pub paragraph: Paragraph,
    pub groups: BTreeSet<KeywordGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRetention {
    pub firm_id: String,
    pub total: usize,
    pub retained: usize,
    pub ratio: f64,
    /// No paragraph of this document survived the filter.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterOutcome {
    pub retained: Vec<ClimateParagraph>,
    /// One entry per document, in first-appearance order.
    pub documents: Vec<DocumentRetention>,
}

impl FilterOutcome {
    pub fn flagged(&self) -> impl Iterator<Item = &DocumentRetention> {
        self.documents.iter().filter(|d| d.flagged)
    }
}

/// Keeps climate-relevant paragraphs in input order and reports per-document
/// retention.
pub fn filter_corpus(paragraphs: &[Paragraph], keywords: &KeywordSet) -> FilterOutcome {
    let mut outcome = FilterOutcome::default();
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for p in paragraphs {
        let slot = *index.entry(p.firm_id.as_str()).or_insert_with(|| {
            outcome.documents.push(DocumentRetention {
                firm_id: p.firm_id.clone(),
                total: 0,
                retained: 0,
                ratio: 0.0,
                flagged: true,
            });
            outcome.documents.len() - 1
        });
        let doc = &mut outcome.documents[slot];
        doc.total += 1;
        let groups = matches(p, keywords);
        if !groups.is_empty() {
            doc.retained += 1;
            outcome.retained.push(ClimateParagraph {
                paragraph: p.clone(),
                groups,
            });
        }
    }
    for doc in &mut outcome.documents {
        doc.ratio = if doc.total == 0 {
            0.0
        } else {
            doc.retained as f64 / doc.total as f64
        };
        doc.flagged = doc.retained == 0;
    }
    outcome
}
