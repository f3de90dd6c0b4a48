//! Firm attributes, eight-class size and emission bins, and the join with
//! report narratives.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{
    CommitmentGlobal, ReportNarrative, SentimentGlobal, SpecificityGlobal, TargetGlobal,
};

pub const FIRM_COLUMNS: [&str; 7] = [
    "firm_id",
    "sector",
    "scope1",
    "scope2",
    "scope3",
    "employees",
    "market_cap_bln",
];

/// Market-cap class edges in billions. Classes are `[lo, hi)` except that
/// the seventh class also takes its upper edge; only values above it are
/// class 8.
pub const CAP_EDGES: [f64; 7] = [1.0, 4.0, 10.0, 20.0, 40.0, 80.0, 240.0];
/// Workforce class edges, same convention as [`CAP_EDGES`].
pub const EMP_EDGES: [f64; 7] = [
    250.0, 1_000.0, 5_000.0, 10_000.0, 40_000.0, 100_000.0, 250_000.0,
];

pub const EMISSION_CLASS_LABELS: [&str; 8] = [
    "Ultra Faible",
    "Très Faible",
    "Faible",
    "Moyen",
    "Moyen+",
    "Élevé",
    "Très Élevé",
    "Extrême",
];

#[derive(Debug, Error)]
pub enum FirmDataError {
    #[error("{path}: header {found:?} does not match the expected columns {expected:?}")]
    SchemaMismatch {
        path: String,
        found: Vec<String>,
        expected: Vec<String>,
    },
    #[error("{path}, line {line}: duplicate firm_id {firm_id}")]
    DuplicateFirmId {
        path: String,
        line: u64,
        firm_id: String,
    },
    #[error("invalid binning: {0}")]
    InvalidBinning(String),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sector {
    Communication,
    ConsumerCyclical,
    ConsumerNonCyclical,
    Financials,
    Suppliers,
    RealEstate,
    Industrials,
    BasicMaterials,
    HealthCare,
    InformationTechnology,
    Energy,
}

impl Sector {
    pub const ALL: [Sector; 11] = [
        Sector::Communication,
        Sector::ConsumerCyclical,
        Sector::ConsumerNonCyclical,
        Sector::Financials,
        Sector::Suppliers,
        Sector::RealEstate,
        Sector::Industrials,
        Sector::BasicMaterials,
        Sector::HealthCare,
        Sector::InformationTechnology,
        Sector::Energy,
    ];

    /// Label as used in the firm tables.
    pub fn label(self) -> &'static str {
        match self {
            Sector::Communication => "Communication",
            Sector::ConsumerCyclical => "Consommation cyclique",
            Sector::ConsumerNonCyclical => "Consommation non cyclique",
            Sector::Financials => "Finances",
            Sector::Suppliers => "Fournisseur",
            Sector::RealEstate => "Immobilier",
            Sector::Industrials => "Industrie",
            Sector::BasicMaterials => "Matériaux de base",
            Sector::HealthCare => "Santé",
            Sector::InformationTechnology => "Technologie de l'information",
            Sector::Energy => "Énergie",
        }
    }

    pub fn english(self) -> &'static str {
        match self {
            Sector::Communication => "Communication",
            Sector::ConsumerCyclical => "Consumer Cyclical",
            Sector::ConsumerNonCyclical => "Consumer Non-Cyclical",
            Sector::Financials => "Financials",
            Sector::Suppliers => "Suppliers",
            Sector::RealEstate => "Real Estate",
            Sector::Industrials => "Industrials",
            Sector::BasicMaterials => "Basic Materials",
            Sector::HealthCare => "Health Care",
            Sector::InformationTechnology => "Information Technology",
            Sector::Energy => "Energy",
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Sector {
    type Err = String;

    /// Accepts either the table label or the English alias, ignoring case
    /// and surrounding whitespace.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().replace('’', "'");
        Sector::ALL
            .into_iter()
            .find(|sec| {
                sec.label().to_lowercase() == s.to_lowercase()
                    || sec.english().eq_ignore_ascii_case(&s)
            })
            .ok_or_else(|| format!("unknown sector {s:?}"))
    }
}

impl Serialize for Sector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Sector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmRecord {
    pub firm_id: String,
    pub sector: Sector,
    pub scope1: Option<f64>,
    pub scope2: Option<f64>,
    pub scope3: Option<f64>,
    pub employees: u64,
    /// Billions of currency units.
    pub market_cap: f64,
}

impl FirmRecord {
    pub fn scope(&self, scope: Scope) -> Option<f64> {
        match scope {
            Scope::Scope1 => self.scope1,
            Scope::Scope2 => self.scope2,
            Scope::Scope3 => self.scope3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    pub line: u64,
    pub firm_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IssueReport {
    pub rejected: Vec<RejectedRow>,
    /// Missing-value count per emission column among accepted rows.
    pub missing: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirmTable {
    pub firms: Vec<FirmRecord>,
    pub issues: IssueReport,
}

fn parse_emission(raw: &str) -> Result<Option<f64>, String> {
    let t = raw.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("nan") || t.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    let v: f64 = t.parse().map_err(|_| format!("{raw:?} is not a number"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("emission {raw:?} must be a non-negative number"));
    }
    Ok(Some(v))
}

fn parse_employees(raw: &str) -> Result<u64, String> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| format!("employees {raw:?} is not a number"))?;
    if !v.is_finite() || v < 1.0 || v.fract() != 0.0 {
        return Err(format!("employees {raw:?} must be a whole number >= 1"));
    }
    Ok(v as u64)
}

fn parse_market_cap(raw: &str) -> Result<f64, String> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| format!("market_cap_bln {raw:?} is not a number"))?;
    if !v.is_finite() || v <= 0.0 {
        return Err(format!("market_cap_bln {raw:?} must be positive"));
    }
    Ok(v)
}

fn parse_row(rec: &csv::StringRecord) -> Result<FirmRecord, String> {
    let firm_id = rec[0].trim().to_string();
    if firm_id.is_empty() {
        return Err("empty firm_id".into());
    }
    Ok(FirmRecord {
        firm_id,
        sector: rec[1].parse()?,
        scope1: parse_emission(&rec[2])?,
        scope2: parse_emission(&rec[3])?,
        scope3: parse_emission(&rec[4])?,
        employees: parse_employees(&rec[5])?,
        market_cap: parse_market_cap(&rec[6])?,
    })
}

/// Reads the firm CSV. Malformed rows are rejected with their line number;
/// missing emissions are kept as missing.
pub fn load_firms(path: &Path) -> Result<FirmTable, FirmDataError> {
    let p = path.display().to_string();
    let io = |e: &dyn fmt::Display| FirmDataError::Io {
        path: p.clone(),
        reason: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| io(&e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| io(&e))?
        .iter()
        .map(|h| h.trim().trim_start_matches('\u{feff}').to_string())
        .collect();
    if header != FIRM_COLUMNS {
        return Err(FirmDataError::SchemaMismatch {
            path: p,
            found: header,
            expected: FIRM_COLUMNS.iter().map(|s| s.to_string()).collect(),
        });
    }

    let mut firms = Vec::new();
    let mut issues = IssueReport::default();
    let mut seen = BTreeSet::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| io(&e))?;
        let line = rec.position().map(|pos| pos.line()).unwrap_or(0);
        if rec.len() != FIRM_COLUMNS.len() {
            issues.rejected.push(RejectedRow {
                line,
                firm_id: rec.get(0).unwrap_or("").trim().to_string(),
                reason: format!(
                    "expected {} fields, found {}",
                    FIRM_COLUMNS.len(),
                    rec.len()
                ),
            });
            continue;
        }
        match parse_row(&rec) {
            Ok(firm) => {
                if !seen.insert(firm.firm_id.clone()) {
                    return Err(FirmDataError::DuplicateFirmId {
                        path: p,
                        line,
                        firm_id: firm.firm_id,
                    });
                }
                firms.push(firm);
            }
            Err(reason) => issues.rejected.push(RejectedRow {
                line,
                firm_id: rec[0].trim().to_string(),
                reason,
            }),
        }
    }
    for scope in Scope::ALL {
        let n = firms.iter().filter(|f| f.scope(scope).is_none()).count();
        issues.missing.insert(scope.column().to_string(), n);
    }
    for r in &issues.rejected {
        log::warn!(
            "{p}, line {}: rejected firm {:?}: {}",
            r.line,
            r.firm_id,
            r.reason
        );
    }
    Ok(FirmTable { firms, issues })
}

/// Number of edges a value clears: `[lo, hi)` for all but the last edge,
/// which a value must strictly exceed.
fn fixed_class(x: f64, edges: &[f64; 7]) -> u8 {
    let below_last = edges[..6].iter().filter(|&&e| x >= e).count();
    (1 + below_last + usize::from(x > edges[6])) as u8
}

macro_rules! class_type {
    ($(#[$doc:meta])* $name:ident, $fmt:literal) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(u8);

        impl $name {
            pub fn new(class: u8) -> Option<Self> {
                (1..=8).contains(&class).then_some($name(class))
            }

            /// 1..=8.
            pub fn number(self) -> u8 {
                self.0
            }

            /// 0..=7, low to high.
            pub fn code(self) -> i64 {
                i64::from(self.0) - 1
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, $fmt, self.0)
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                (1..=8u8)
                    .find(|&n| format!($fmt, n) == s.trim())
                    .map($name)
                    .ok_or_else(|| format!("invalid {} {s:?}", stringify!($name)))
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

class_type!(
    /// Market-cap class, `Cap_1` .. `Cap_8`.
    CapClass,
    "Cap_{}"
);
class_type!(
    /// Workforce class, `Emp_01` .. `Emp_08`.
    EmpClass,
    "Emp_{:02}"
);
class_type!(
    /// Emission class, `C1` .. `C8`.
    EmissionClass,
    "C{}"
);

impl EmissionClass {
    pub fn label(self) -> &'static str {
        EMISSION_CLASS_LABELS[usize::from(self.0) - 1]
    }
}

/// Market cap in billions; expects a positive value.
pub fn assign_cap_class(market_cap: f64) -> CapClass {
    CapClass(fixed_class(market_cap, &CAP_EDGES))
}

/// Head count; expects at least 1.
pub fn assign_emp_class(employees: f64) -> EmpClass {
    EmpClass(fixed_class(employees, &EMP_EDGES))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Scope1,
    Scope2,
    Scope3,
}

impl Scope {
    pub const ALL: [Scope; 3] = [Scope::Scope1, Scope::Scope2, Scope::Scope3];

    pub fn column(self) -> &'static str {
        match self {
            Scope::Scope1 => "scope1",
            Scope::Scope2 => "scope2",
            Scope::Scope3 => "scope3",
        }
    }

    /// Short class-variable name (EI, EJ, EK).
    pub fn class_name(self) -> &'static str {
        match self {
            Scope::Scope1 => "EI",
            Scope::Scope2 => "EJ",
            Scope::Scope3 => "EK",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BinningMode {
    /// Empirical 12.5% quantile edges.
    #[default]
    Octile,
    /// Seven log-spaced edges between the smallest positive and the largest value.
    LogEdges,
    /// Seven user-supplied edges.
    ExplicitEdges,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EmissionBinning {
    pub mode: BinningMode,
    /// Explicit edges per scope (`scope1`, ...), used in `explicit_edges` mode.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub edges: BTreeMap<Scope, Vec<f64>>,
}

impl EmissionBinning {
    pub fn validate(&self) -> Result<(), FirmDataError> {
        if self.mode != BinningMode::ExplicitEdges {
            return Ok(());
        }
        for scope in Scope::ALL {
            let edges = self.edges.get(&scope).ok_or_else(|| {
                FirmDataError::InvalidBinning(format!("no explicit edges for {}", scope.column()))
            })?;
            check_edges(edges)
                .map_err(|r| FirmDataError::InvalidBinning(format!("{}: {r}", scope.column())))?;
        }
        Ok(())
    }
}

fn check_edges(edges: &[f64]) -> Result<(), String> {
    if edges.len() != 7 {
        return Err(format!("expected 7 edges, got {}", edges.len()));
    }
    if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(format!(
            "edges {edges:?} must be finite and strictly increasing"
        ));
    }
    Ok(())
}

/// Resolved edges for one emission scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeEdges {
    pub mode: BinningMode,
    pub edges: Vec<f64>,
    pub n_present: usize,
    /// Fewer than eight classes could be filled.
    pub degenerate: bool,
}

impl ScopeEdges {
    /// Right-closed bins: a value equal to an edge stays in the lower class.
    pub fn classify(&self, x: f64) -> EmissionClass {
        let above = self.edges.iter().filter(|&&e| x > e).count();
        EmissionClass((1 + above).min(8) as u8)
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn resolve_edges(
    values: &[f64],
    scope: Scope,
    binning: &EmissionBinning,
) -> Result<ScopeEdges, FirmDataError> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let distinct = {
        let mut d = sorted.clone();
        d.dedup();
        d.len()
    };
    let (edges, degenerate) = match binning.mode {
        BinningMode::Octile => {
            if sorted.is_empty() {
                (Vec::new(), true)
            } else {
                let edges: Vec<f64> = (1..8)
                    .map(|i| quantile_sorted(&sorted, i as f64 / 8.0))
                    .collect();
                (edges, distinct < 8)
            }
        }
        BinningMode::LogEdges => {
            let min_pos = sorted.iter().copied().find(|&v| v > 0.0);
            match (min_pos, sorted.last()) {
                (Some(lo), Some(&hi)) if hi > lo => {
                    let (a, b) = (lo.ln(), hi.ln());
                    let edges = (1..8)
                        .map(|i| (a + (b - a) * i as f64 / 8.0).exp())
                        .collect();
                    (edges, distinct < 8)
                }
                _ => (Vec::new(), true),
            }
        }
        BinningMode::ExplicitEdges => {
            let edges = binning.edges.get(&scope).cloned().ok_or_else(|| {
                FirmDataError::InvalidBinning(format!("no explicit edges for {}", scope.column()))
            })?;
            check_edges(&edges).map_err(FirmDataError::InvalidBinning)?;
            (edges, false)
        }
    };
    if degenerate {
        log::warn!(
            "{}: only {distinct} distinct values, fewer than eight classes will be occupied",
            scope.column()
        );
    }
    Ok(ScopeEdges {
        mode: binning.mode,
        edges,
        n_present: values.len(),
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAssignment {
    pub firm_id: String,
    pub cap_class: CapClass,
    pub emp_class: EmpClass,
    pub ei_class: Option<EmissionClass>,
    pub ej_class: Option<EmissionClass>,
    pub ek_class: Option<EmissionClass>,
}

impl ClassAssignment {
    pub fn emission(&self, scope: Scope) -> Option<EmissionClass> {
        match scope {
            Scope::Scope1 => self.ei_class,
            Scope::Scope2 => self.ej_class,
            Scope::Scope3 => self.ek_class,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedFirms {
    /// Aligned with the input firms.
    pub classes: Vec<ClassAssignment>,
    pub edges: BTreeMap<Scope, ScopeEdges>,
}

/// Assigns size classes and emission classes; emission edges are computed
/// over the firms passed in.
pub fn assign_classes(
    firms: &[FirmRecord],
    binning: &EmissionBinning,
) -> Result<BinnedFirms, FirmDataError> {
    binning.validate()?;
    let mut edges = BTreeMap::new();
    for scope in Scope::ALL {
        let present: Vec<f64> = firms.iter().filter_map(|f| f.scope(scope)).collect();
        edges.insert(scope, resolve_edges(&present, scope, binning)?);
    }
    let class_of = |f: &FirmRecord, scope: Scope| f.scope(scope).map(|v| edges[&scope].classify(v));
    let classes = firms
        .iter()
        .map(|f| ClassAssignment {
            firm_id: f.firm_id.clone(),
            cap_class: assign_cap_class(f.market_cap),
            emp_class: assign_emp_class(f.employees as f64),
            ei_class: class_of(f, Scope::Scope1),
            ej_class: class_of(f, Scope::Scope2),
            ek_class: class_of(f, Scope::Scope3),
        })
        .collect();
    Ok(BinnedFirms { classes, edges })
}

/// One firm of the analysis population: its narrative, attributes and classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinedRecord {
    pub firm_id: String,
    pub sector: Sector,
    pub sentiment: SentimentGlobal,
    pub commitment: CommitmentGlobal,
    pub specificity: SpecificityGlobal,
    pub netzero: TargetGlobal,
    pub n_paragraphs: usize,
    pub scope1: Option<f64>,
    pub scope2: Option<f64>,
    pub scope3: Option<f64>,
    pub employees: u64,
    pub market_cap: f64,
    pub cap_class: CapClass,
    pub emp_class: EmpClass,
    pub ei_class: Option<EmissionClass>,
    pub ej_class: Option<EmissionClass>,
    pub ek_class: Option<EmissionClass>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JoinOutcome {
    /// Sorted by firm_id.
    pub records: Vec<JoinedRecord>,
    pub edges: BTreeMap<Scope, ScopeEdges>,
    pub narratives_without_firm: Vec<String>,
    pub firms_without_narrative: Vec<String>,
}

/// Inner join of narratives and firms; emission classes are binned over the
/// joined population.
pub fn join(
    narratives: &[ReportNarrative],
    firms: &[FirmRecord],
    binning: &EmissionBinning,
) -> Result<JoinOutcome, FirmDataError> {
    let by_id: BTreeMap<&str, &FirmRecord> =
        firms.iter().map(|f| (f.firm_id.as_str(), f)).collect();
    let narrated: BTreeSet<&str> = narratives.iter().map(|n| n.firm_id.as_str()).collect();
    let mut pairs: Vec<(&ReportNarrative, &FirmRecord)> = narratives
        .iter()
        .filter_map(|n| by_id.get(n.firm_id.as_str()).map(|f| (n, *f)))
        .collect();
    pairs.sort_by(|a, b| a.0.firm_id.cmp(&b.0.firm_id));
    let narratives_without_firm = narratives
        .iter()
        .filter(|n| !by_id.contains_key(n.firm_id.as_str()))
        .map(|n| n.firm_id.clone())
        .collect();
    let firms_without_narrative = firms
        .iter()
        .filter(|f| !narrated.contains(f.firm_id.as_str()))
        .map(|f| f.firm_id.clone())
        .collect();

    let joined_firms: Vec<FirmRecord> = pairs.iter().map(|(_, f)| (*f).clone()).collect();
    let binned = assign_classes(&joined_firms, binning)?;
    let records = pairs
        .iter()
        .zip(&binned.classes)
        .map(|((n, f), c)| JoinedRecord {
            firm_id: f.firm_id.clone(),
            sector: f.sector,
            sentiment: n.sentiment_global,
            commitment: n.commitment_global,
            specificity: n.specificity_global,
            netzero: n.netzero_global,
            n_paragraphs: n.n_paragraphs,
            scope1: f.scope1,
            scope2: f.scope2,
            scope3: f.scope3,
            employees: f.employees,
            market_cap: f.market_cap,
            cap_class: c.cap_class,
            emp_class: c.emp_class,
            ei_class: c.ei_class,
            ej_class: c.ej_class,
            ek_class: c.ek_class,
        })
        .collect();
    Ok(JoinOutcome {
        records,
        edges: binned.edges,
        narratives_without_firm,
        firms_without_narrative,
    })
}

pub fn write_joined_csv(path: &Path, records: &[JoinedRecord]) -> Result<(), FirmDataError> {
    let io = |e: &dyn fmt::Display| FirmDataError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| io(&e))?;
    for r in records {
        w.serialize(r).map_err(|e| io(&e))?;
    }
    w.flush().map_err(|e| io(&e))
}

pub fn read_joined_csv(path: &Path) -> Result<Vec<JoinedRecord>, FirmDataError> {
    let io = |e: &dyn fmt::Display| FirmDataError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| io(&e))?;
    r.deserialize().map(|row| row.map_err(|e| io(&e))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::fs;

    #[test]
    fn cap_boundary_table() {
        let table = [
            (0.5, 1),
            (0.999, 1),
            (1.0, 2),
            (3.99, 2),
            (4.0, 3),
            (7.24, 3),
            (10.0, 4),
            (20.0, 5),
            (40.0, 6),
            (80.0, 7),
            (239.9, 7),
            (240.0, 7),
            (240.01, 8),
            (3000.0, 8),
        ];
        for (x, want) in table {
            assert_eq!(assign_cap_class(x).number(), want, "cap {x}");
        }
        assert_eq!(assign_cap_class(7.24).to_string(), "Cap_3");
    }

    #[test]
    fn emp_boundary_table() {
        let table = [
            (2.0, 1),
            (249.0, 1),
            (250.0, 2),
            (999.0, 2),
            (1_000.0, 3),
            (5_000.0, 4),
            (7_138.0, 4),
            (10_000.0, 5),
            (40_000.0, 6),
            (100_000.0, 7),
            (250_000.0, 7),
            (250_001.0, 8),
        ];
        for (x, want) in table {
            assert_eq!(assign_emp_class(x).number(), want, "emp {x}");
        }
        assert_eq!(assign_emp_class(7138.0).to_string(), "Emp_04");
        assert_eq!("Emp_04".parse::<EmpClass>().unwrap().number(), 4);
    }

    #[test]
    fn sectors_parse_from_either_name() {
        for s in Sector::ALL {
            assert_eq!(s.label().parse::<Sector>().unwrap(), s);
            assert_eq!(s.english().parse::<Sector>().unwrap(), s);
        }
        assert_eq!("énergie".parse::<Sector>().unwrap(), Sector::Energy);
        assert!("Utilities".parse::<Sector>().is_err());
    }

    fn write(dir: &Path, body: &str) -> std::path::PathBuf {
        let p = dir.join("firms.csv");
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loader_rejects_bad_rows_and_keeps_missing() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "firm_id,sector,scope1,scope2,scope3,employees,market_cap_bln\n\
             A,Énergie,100,20,,5000,12.5\n\
             B,Finances,5,,,-5,3\n\
             C,Health Care,1,2,3,10,0.4\n\
             D,Santé,x,2,3,10,1\n",
        );
        let t = load_firms(&p).unwrap();
        assert_eq!(t.firms.len(), 2);
        assert_eq!(t.firms[0].scope3, None);
        assert_eq!(t.firms[1].sector, Sector::HealthCare);
        let lines: Vec<_> = t.issues.rejected.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![3, 5]);
        assert!(t.issues.rejected[0].reason.contains("employees"));
        assert_eq!(t.issues.missing["scope3"], 1);
        assert_eq!(t.issues.missing["scope2"], 0);
    }

    #[test]
    fn loader_schema_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "firm,sector\nA,Énergie\n");
        assert!(matches!(
            load_firms(&p),
            Err(FirmDataError::SchemaMismatch { .. })
        ));
        let p = write(
            dir.path(),
            "firm_id,sector,scope1,scope2,scope3,employees,market_cap_bln\n\
             A,Énergie,1,1,1,10,1\nA,Énergie,1,1,1,10,1\n",
        );
        assert!(matches!(
            load_firms(&p),
            Err(FirmDataError::DuplicateFirmId { line: 3, .. })
        ));
    }

    #[test]
    fn octiles_split_evenly() {
        let values: Vec<f64> = (0..800).map(|i| (i as f64).powf(1.5)).collect();
        let edges = resolve_edges(&values, Scope::Scope1, &EmissionBinning::default()).unwrap();
        assert!(!edges.degenerate);
        let mut counts = [0usize; 8];
        for v in &values {
            counts[usize::from(edges.classify(*v).number()) - 1] += 1;
        }
        for c in counts {
            assert!((99..=101).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn few_distinct_values_warn_but_bin() {
        let values = [1.0, 1.0, 2.0, 2.0, 3.0];
        let edges = resolve_edges(&values, Scope::Scope2, &EmissionBinning::default()).unwrap();
        assert!(edges.degenerate);
        let occupied: BTreeSet<_> = values.iter().map(|v| edges.classify(*v)).collect();
        assert!(occupied.len() <= 8);
    }

    #[test]
    fn explicit_and_log_edges() {
        let explicit = EmissionBinning {
            mode: BinningMode::ExplicitEdges,
            edges: Scope::ALL
                .iter()
                .map(|&s| (s, vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0]))
                .collect(),
        };
        let e = resolve_edges(&[], Scope::Scope3, &explicit).unwrap();
        assert_eq!(e.classify(10.0).number(), 1);
        assert_eq!(e.classify(10.5).number(), 2);
        assert_eq!(e.classify(71.0).to_string(), "C8");
        assert_eq!(e.classify(71.0).label(), "Extrême");

        let mut bad = explicit.clone();
        bad.edges
            .insert(Scope::Scope1, vec![1.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(bad.validate().is_err());

        let log = EmissionBinning {
            mode: BinningMode::LogEdges,
            ..Default::default()
        };
        let e = resolve_edges(&[0.0, 1.0, 1e8], Scope::Scope1, &log).unwrap();
        assert!((e.edges[3] - 1e4).abs() < 1e-6);
        assert_eq!(e.classify(0.0).number(), 1);
        assert_eq!(e.classify(1e8).number(), 8);
    }

    #[test]
    fn missing_scope_yields_missing_class() {
        let firm = FirmRecord {
            firm_id: "A".into(),
            sector: Sector::Energy,
            scope1: Some(3.0),
            scope2: Some(1.0),
            scope3: None,
            employees: 10,
            market_cap: 2.0,
        };
        let out = assign_classes(&[firm], &EmissionBinning::default()).unwrap();
        assert_eq!(out.classes[0].ek_class, None);
        assert!(out.classes[0].ei_class.is_some());
    }

    proptest! {
        #[test]
        fn binning_is_monotone(a in 0.01f64..1e6, b in 0.01f64..1e6, values in prop::collection::vec(0.0f64..1e6, 1..200)) {
            let (x, y) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(assign_cap_class(x) <= assign_cap_class(y));
            prop_assert!(assign_emp_class(x.max(1.0)) <= assign_emp_class(y.max(1.0)));
            for mode in [BinningMode::Octile, BinningMode::LogEdges] {
                let e = resolve_edges(&values, Scope::Scope1, &EmissionBinning { mode, ..Default::default() }).unwrap();
                prop_assert!(e.classify(x) <= e.classify(y));
            }
        }
    }
}
