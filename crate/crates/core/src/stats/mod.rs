//! Ordinal encoding of report labels, rank correlations, distributions and
//! cross-tabulations over the joined firm population.

mod spearman;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{CommitmentGlobal, SentimentGlobal, SpecificityGlobal, TargetGlobal};
use crate::firms::{JoinedRecord, Sector, EMISSION_CLASS_LABELS};

pub use spearman::{midranks, pearson, spearman, PValueMethod, Spearman, EXACT_PVALUE_MAX_N};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("a variable is constant, correlation undefined")]
    ZeroVariance,
    #[error("need at least 3 observations, got {0}")]
    TooFewObservations(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no records")]
    Empty,
}

/// A categorical variable of the analysis population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Sentiment,
    Commitment,
    Specificity,
    Netzero,
    Sector,
    CapClass,
    EmpClass,
    EiClass,
    EjClass,
    EkClass,
}

impl Variable {
    /// The four narrative labels, in matrix order.
    pub const NARRATIVE: [Variable; 4] = [
        Variable::Sentiment,
        Variable::Commitment,
        Variable::Specificity,
        Variable::Netzero,
    ];
    pub const GROUPINGS: [Variable; 6] = [
        Variable::CapClass,
        Variable::EmpClass,
        Variable::Sector,
        Variable::EiClass,
        Variable::EjClass,
        Variable::EkClass,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::Sentiment => "sentiment",
            Variable::Commitment => "commitment",
            Variable::Specificity => "specificity",
            Variable::Netzero => "netzero",
            Variable::Sector => "sector",
            Variable::CapClass => "cap_class",
            Variable::EmpClass => "emp_class",
            Variable::EiClass => "ei_class",
            Variable::EjClass => "ej_class",
            Variable::EkClass => "ek_class",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Variable::Sentiment => "Sentiment",
            Variable::Commitment => "Commitment",
            Variable::Specificity => "Specificity",
            Variable::Netzero => "Net-zero/Reduction",
            Variable::Sector => "Sector",
            Variable::CapClass => "Market cap class",
            Variable::EmpClass => "Employees class",
            Variable::EiClass => "Scope EI class",
            Variable::EjClass => "Scope EJ class",
            Variable::EkClass => "Scope EK class",
        }
    }

    /// Category labels in code order.
    pub fn categories(self) -> Vec<String> {
        fn strs(v: impl IntoIterator<Item = &'static str>) -> Vec<String> {
            v.into_iter().map(String::from).collect()
        }
        match self {
            Variable::Sentiment => strs(SentimentGlobal::ALL.iter().map(|s| s.as_str())),
            Variable::Commitment => strs(CommitmentGlobal::ALL.iter().map(|s| s.as_str())),
            Variable::Specificity => strs(SpecificityGlobal::ALL.iter().map(|s| s.as_str())),
            Variable::Netzero => strs(TargetGlobal::ALL.iter().map(|s| s.as_str())),
            Variable::Sector => strs(Sector::ALL.iter().map(|s| s.label())),
            Variable::CapClass => (1..=8).map(|i| format!("Cap_{i}")).collect(),
            Variable::EmpClass => (1..=8).map(|i| format!("Emp_{i:02}")).collect(),
            Variable::EiClass | Variable::EjClass | Variable::EkClass => EMISSION_CLASS_LABELS
                .iter()
                .enumerate()
                .map(|(i, l)| format!("C{} - {l}", i + 1))
                .collect(),
        }
    }

    /// Category index of a record, `None` when missing.
    pub fn code(self, r: &JoinedRecord) -> Option<usize> {
        let c = match self {
            Variable::Sentiment => r.sentiment.code(),
            Variable::Commitment => r.commitment.code(),
            Variable::Specificity => r.specificity.code(),
            Variable::Netzero => r.netzero.code(),
            Variable::Sector => Sector::ALL.iter().position(|s| *s == r.sector)? as i64,
            Variable::CapClass => r.cap_class.code(),
            Variable::EmpClass => r.emp_class.code(),
            Variable::EiClass => r.ei_class?.code(),
            Variable::EjClass => r.ej_class?.code(),
            Variable::EkClass => r.ek_class?.code(),
        };
        Some(c as usize)
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordinal codes of one firm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncodedRecord {
    pub sentiment_code: i64,
    pub commitment_code: i64,
    pub specificity_code: i64,
    pub netzero_code: i64,
    pub cap_code: i64,
    pub emp_code: i64,
    pub ei_code: Option<i64>,
    pub ej_code: Option<i64>,
    pub ek_code: Option<i64>,
}

pub fn encode(r: &JoinedRecord) -> EncodedRecord {
    EncodedRecord {
        sentiment_code: r.sentiment.code(),
        commitment_code: r.commitment.code(),
        specificity_code: r.specificity.code(),
        netzero_code: r.netzero.code(),
        cap_code: r.cap_class.code(),
        emp_code: r.emp_class.code(),
        ei_code: r.ei_class.map(|c| c.code()),
        ej_code: r.ej_class.map(|c| c.code()),
        ek_code: r.ek_class.map(|c| c.code()),
    }
}

/// Inverse of the narrative part of [`encode`].
pub fn decode_narrative(
    e: &EncodedRecord,
) -> Option<(
    SentimentGlobal,
    CommitmentGlobal,
    SpecificityGlobal,
    TargetGlobal,
)> {
    Some((
        SentimentGlobal::from_code(e.sentiment_code)?,
        CommitmentGlobal::from_code(e.commitment_code)?,
        SpecificityGlobal::from_code(e.specificity_code)?,
        TargetGlobal::from_code(e.netzero_code)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub variables: Vec<Variable>,
    /// `None` where the correlation is undefined (a constant variable).
    pub rho: Vec<Vec<Option<f64>>>,
    pub pvalues: Vec<Vec<Option<f64>>>,
    /// Complete-case observation count per pair.
    pub n: Vec<Vec<usize>>,
}

/// Pairwise Spearman correlations, complete cases per pair.
pub fn correlation_matrix(records: &[JoinedRecord], variables: &[Variable]) -> CorrelationMatrix {
    let k = variables.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect();
    let cells: Vec<(usize, usize, Option<Spearman>, usize)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = records
                .iter()
                .filter_map(|r| Some((variables[i].code(r)? as f64, variables[j].code(r)? as f64)))
                .unzip();
            let n = xs.len();
            (i, j, spearman(&xs, &ys).ok(), n)
        })
        .collect();
    let mut rho = vec![vec![None; k]; k];
    let mut pvalues = vec![vec![None; k]; k];
    let mut n = vec![vec![0; k]; k];
    for (i, j, s, count) in cells {
        let (r, p) = match s {
            Some(_) if i == j => (Some(1.0), Some(0.0)),
            Some(s) => (Some(s.rho), Some(s.pvalue)),
            None => (None, None),
        };
        rho[i][j] = r;
        rho[j][i] = r;
        pvalues[i][j] = p;
        pvalues[j][i] = p;
        n[i][j] = count;
        n[j][i] = count;
    }
    CorrelationMatrix {
        variables: variables.to_vec(),
        rho,
        pvalues,
        n,
    }
}

/// Category counts of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub variable: Variable,
    pub labels: Vec<String>,
    pub counts: Vec<usize>,
    /// Records where the variable is present.
    pub total: usize,
}

impl Distribution {
    pub fn fraction(&self, i: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.counts[i] as f64 / self.total as f64
        }
    }

    pub fn count_of(&self, label: &str) -> Option<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.counts[i])
    }
}

pub fn overall_distribution(records: &[JoinedRecord], variable: Variable) -> Distribution {
    let labels = variable.categories();
    let mut counts = vec![0; labels.len()];
    for r in records {
        if let Some(c) = variable.code(r) {
            counts[c] += 1;
        }
    }
    let total = counts.iter().sum();
    Distribution {
        variable,
        labels,
        counts,
        total,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTab {
    pub row_variable: Variable,
    pub col_variable: Variable,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
    /// Row percentages as fractions; all zero for an empty row.
    pub row_pcts: Vec<Vec<f64>>,
}

impl CrossTab {
    pub fn row_total(&self, i: usize) -> usize {
        self.counts[i].iter().sum()
    }

    pub fn total(&self) -> usize {
        (0..self.counts.len()).map(|i| self.row_total(i)).sum()
    }

    /// `count (pct%)`, one decimal.
    /// `"n (x.x%)"`; a row with no members renders `"0 (nan%)"`.
    pub fn cell_text(&self, i: usize, j: usize) -> String {
        if self.row_total(i) == 0 {
            return "0 (nan%)".to_string();
        }
        format!(
            "{} ({})",
            self.counts[i][j],
            format_pct(self.row_pcts[i][j])
        )
    }

    pub fn cell(&self, row: &str, col: &str) -> Option<(usize, f64)> {
        let i = self.row_labels.iter().position(|l| l == row)?;
        let j = self.col_labels.iter().position(|l| l == col)?;
        Some((self.counts[i][j], self.row_pcts[i][j]))
    }
}

/// Counts of `row` × `col` over records where both are present.
pub fn crosstab(records: &[JoinedRecord], row: Variable, col: Variable) -> CrossTab {
    let row_labels = row.categories();
    let col_labels = col.categories();
    let mut counts = vec![vec![0usize; col_labels.len()]; row_labels.len()];
    for r in records {
        if let (Some(i), Some(j)) = (row.code(r), col.code(r)) {
            counts[i][j] += 1;
        }
    }
    let row_pcts = counts
        .iter()
        .map(|cells| {
            let total: usize = cells.iter().sum();
            cells
                .iter()
                .map(|&c| {
                    if total == 0 {
                        0.0
                    } else {
                        c as f64 / total as f64
                    }
                })
                .collect()
        })
        .collect();
    CrossTab {
        row_variable: row,
        col_variable: col,
        row_labels,
        col_labels,
        counts,
        row_pcts,
    }
}

/// A fraction as a percentage with one decimal, e.g. `86.5%`.
pub fn format_pct(fraction: f64) -> String {
    format!("{:.1}%", fraction * 100.0)
}

/// The cross-tabulations reported by the pipeline.
pub fn standard_crosstabs() -> Vec<(Variable, Variable)> {
    let mut out = vec![
        (Variable::Commitment, Variable::Sentiment),
        (Variable::Commitment, Variable::Specificity),
        (Variable::Commitment, Variable::Netzero),
        (Variable::Specificity, Variable::Sentiment),
        (Variable::Specificity, Variable::Netzero),
        (Variable::Netzero, Variable::Sentiment),
    ];
    for g in Variable::GROUPINGS {
        for v in Variable::NARRATIVE {
            out.push((g, v));
        }
    }
    out
}

/// Everything the statistics stage produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsBundle {
    pub n_records: usize,
    pub correlation: CorrelationMatrix,
    pub distributions: Vec<Distribution>,
    pub crosstabs: Vec<CrossTab>,
}

pub fn analyze(records: &[JoinedRecord]) -> Result<StatsBundle, StatsError> {
    if records.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(StatsBundle {
        n_records: records.len(),
        correlation: correlation_matrix(records, &Variable::NARRATIVE),
        distributions: Variable::NARRATIVE
            .iter()
            .map(|&v| overall_distribution(records, v))
            .collect(),
        crosstabs: standard_crosstabs()
            .into_iter()
            .map(|(r, c)| crosstab(records, r, c))
            .collect(),
    })
}


#[cfg(test)]
mod tests {
    use super::testutil::record;
    use super::*;
    use proptest::prelude::*;

    fn arb_records() -> impl Strategy<Value = Vec<JoinedRecord>> {
        prop::collection::vec((0usize..4, 0usize..2, 0usize..2, 0usize..4), 1..80).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (s, c, sp, t))| {
                    record(
                        i,
                        SentimentGlobal::ALL[s],
                        CommitmentGlobal::ALL[c],
                        SpecificityGlobal::ALL[sp],
                        TargetGlobal::ALL[t],
                    )
                })
                .collect()
        })
    }

    #[test]
    fn encoding_table() {
        let codes: Vec<_> = SentimentGlobal::ALL
            .iter()
            .map(|s| (s.as_str(), s.code()))
            .collect();
        assert_eq!(
            codes,
            [
                ("risk", 0),
                ("risk_opportunity", 1),
                ("neutral", 2),
                ("opportunity", 3)
            ]
        );
        let codes: Vec<_> = TargetGlobal::ALL
            .iter()
            .map(|s| (s.as_str(), s.code()))
            .collect();
        assert_eq!(
            codes,
            [
                ("no_reduction", 0),
                ("reduction", 1),
                ("reduction_netzero", 2),
                ("netzero", 3)
            ]
        );
        assert_eq!(CommitmentGlobal::Commitment.code(), 1);
        assert_eq!(SpecificityGlobal::Specific.code(), 1);
    }

    #[test]
    fn encode_decode_round_trip() {
        let mut id = 0;
        for &s in SentimentGlobal::ALL {
            for &c in CommitmentGlobal::ALL {
                for &sp in SpecificityGlobal::ALL {
                    for &t in TargetGlobal::ALL {
                        let r = record(id, s, c, sp, t);
                        id += 1;
                        assert_eq!(decode_narrative(&encode(&r)), Some((s, c, sp, t)));
                    }
                }
            }
        }
    }

    #[test]
    fn constant_variable_is_missing_in_matrix() {
        let records: Vec<_> = (0..12)
            .map(|i| {
                record(
                    i,
                    SentimentGlobal::ALL[i % 4],
                    CommitmentGlobal::Commitment,
                    SpecificityGlobal::ALL[i % 2],
                    TargetGlobal::ALL[(i / 3) % 4],
                )
            })
            .collect();
        let m = correlation_matrix(&records, &Variable::NARRATIVE);
        assert!(m.rho[1].iter().all(Option::is_none));
        assert_eq!(m.rho[0][0], Some(1.0));
        assert!(m.rho[0][2].is_some());
    }

    #[test]
    fn zero_population_row_renders_nan() {
        let records = vec![record(
            0,
            SentimentGlobal::Risk,
            CommitmentGlobal::Commitment,
            SpecificityGlobal::Specific,
            TargetGlobal::Netzero,
        )];
        let t = crosstab(&records, Variable::Commitment, Variable::Sentiment);
        assert_eq!(t.cell_text(0, 0), "0 (nan%)");
        assert_eq!(t.cell_text(1, 0), "1 (100.0%)");
        let d = overall_distribution(&records, Variable::Specificity);
        assert_eq!(d.fraction(1), 1.0);
    }

    #[test]
    fn missing_values_are_left_out() {
        let records: Vec<_> = (0..5)
            .map(|i| {
                record(
                    i,
                    SentimentGlobal::Risk,
                    CommitmentGlobal::Commitment,
                    SpecificityGlobal::General,
                    TargetGlobal::Netzero,
                )
            })
            .collect();
        assert_eq!(overall_distribution(&records, Variable::EjClass).total, 0);
        assert_eq!(
            crosstab(&records, Variable::EjClass, Variable::Sentiment).total(),
            0
        );
        assert_eq!(overall_distribution(&records, Variable::EkClass).total, 5);
    }

    proptest! {
        #[test]
        fn crosstab_bookkeeping(records in arb_records()) {
            for (row, col) in standard_crosstabs() {
                let t = crosstab(&records, row, col);
                let rd = overall_distribution(&records, row);
                let cd = overall_distribution(&records, col);
                for i in 0..t.row_labels.len() {
                    prop_assert_eq!(t.row_total(i), if row == Variable::EjClass || col == Variable::EjClass { 0 } else { rd.counts[i] });
                    if t.row_total(i) > 0 {
                        prop_assert!((t.row_pcts[i].iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                    }
                }
                if row != Variable::EjClass && col != Variable::EjClass {
                    for j in 0..t.col_labels.len() {
                        let col_sum: usize = t.counts.iter().map(|r| r[j]).sum();
                        prop_assert_eq!(col_sum, cd.counts[j]);
                    }
                }
            }
        }

        #[test]
        fn duplication_keeps_correlations(records in arb_records()) {
            let doubled: Vec<_> = records.iter().chain(records.iter()).cloned().collect();
            let a = correlation_matrix(&records, &Variable::NARRATIVE);
            let b = correlation_matrix(&doubled, &Variable::NARRATIVE);
            for i in 0..4 {
                for j in 0..4 {
                    match (a.rho[i][j], b.rho[i][j]) {
                        (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-12),
                        (None, None) => {}
                        // two copies of a 1-2 record sample can cross the n >= 3 floor
                        (None, Some(_)) => prop_assert!(records.len() < 3),
                        other => prop_assert!(false, "{:?}", other),
                    }
                }
            }
        }

        #[test]
        fn matrix_is_symmetric(records in arb_records()) {
            let m = correlation_matrix(&records, &Variable::NARRATIVE);
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert_eq!(m.rho[i][j], m.rho[j][i]);
                    if let Some(r) = m.rho[i][j] {
                        prop_assert!(r.abs() <= 1.0);
                    }
                }
            }
        }
    }
}
