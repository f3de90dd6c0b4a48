use super::{Artifact, ReportError};
use crate::cluster::ClusterReport;
use crate::stats::{format_pct, CorrelationMatrix, CrossTab, Distribution, StatsBundle};

/// A rectangular table with a header row, rendered as CSV and Markdown.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> Result<Vec<u8>, ReportError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner()
            .map_err(|e| ReportError::Render(e.to_string()))
    }

    /// GitHub-style pipe table; the first column is left-aligned, the rest right.
    pub fn to_markdown(&self) -> String {
        let esc = |s: &str| s.replace('|', "\\|");
        let mut out = format!("### {}\n\n", self.title);
        out.push_str(&format!(
            "| {} |\n",
            self.header
                .iter()
                .map(|h| esc(h))
                .collect::<Vec<_>>()
                .join(" | ")
        ));
        let rule: Vec<&str> = (0..self.header.len())
            .map(|i| if i == 0 { ":---" } else { "---:" })
            .collect();
        out.push_str(&format!("| {} |\n", rule.join(" | ")));
        for r in &self.rows {
            out.push_str(&format!(
                "| {} |\n",
                r.iter().map(|c| esc(c)).collect::<Vec<_>>().join(" | ")
            ));
        }
        out
    }

    fn artifacts(&self, stem: &str) -> Result<[Artifact; 2], ReportError> {
        Ok([
            Artifact::new(format!("tables/{stem}.csv"), self.to_csv()?),
            Artifact::new(format!("tables/{stem}.md"), self.to_markdown().into_bytes()),
        ])
    }
}

/// Two decimals, with negative zero printed as `0.00`.
pub(crate) fn fixed2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

pub fn distribution_table(dists: &[Distribution]) -> Table {
    let mut rows = Vec::new();
    for d in dists {
        for (i, label) in d.labels.iter().enumerate() {
            rows.push(vec![
                d.variable.title().to_string(),
                label.clone(),
                d.counts[i].to_string(),
                if d.total == 0 {
                    "nan%".to_string()
                } else {
                    format_pct(d.fraction(i))
                },
            ]);
        }
    }
    Table {
        title: "Global distribution".into(),
        header: ["Variable", "Label", "Count", "Share"]
            .map(String::from)
            .to_vec(),
        rows,
    }
}

pub fn crosstab_table(t: &CrossTab) -> Table {
    let mut header = vec![t.row_variable.title().to_string()];
    header.extend(t.col_labels.iter().cloned());
    let rows = t
        .row_labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let mut r = vec![l.clone()];
            r.extend((0..t.col_labels.len()).map(|j| t.cell_text(i, j)));
            r
        })
        .collect();
    Table {
        title: format!("{} by {}", t.col_variable.title(), t.row_variable.title()),
        header,
        rows,
    }
}

pub fn crosstab_stem(t: &CrossTab) -> String {
    format!(
        "crosstab_{}_vs_{}",
        t.row_variable.name(),
        t.col_variable.name()
    )
}

/// Lower triangle with the diagonal, `rho (p)` per cell.
pub fn correlation_table(m: &CorrelationMatrix) -> Table {
    let mut header = vec!["Variable".to_string()];
    header.extend(m.variables.iter().map(|v| v.title().to_string()));
    let rows = m
        .variables
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut r = vec![v.title().to_string()];
            for j in 0..m.variables.len() {
                r.push(if j > i {
                    String::new()
                } else {
                    match (m.rho[i][j], m.pvalues[i][j]) {
                        (Some(rho), Some(p)) => format!("{rho:.4} (p={p:.4})"),
                        (Some(rho), None) => format!("{rho:.4}"),
                        _ => "n/a".to_string(),
                    }
                });
            }
            r
        })
        .collect();
    Table {
        title: "Spearman correlations".into(),
        header,
        rows,
    }
}

pub fn cluster_profile_table(rep: &ClusterReport) -> Table {
    let mut header = vec!["Cluster".to_string(), "Count".to_string()];
    header.extend(rep.columns.iter().cloned());
    header.push("Dominant sector".into());
    let rows = rep
        .profiles
        .iter()
        .map(|p| {
            let mut r = vec![p.cluster.to_string(), p.count.to_string()];
            r.extend(p.centroid_original.iter().map(|&v| fixed2(v)));
            // most frequent, first label on ties
            let dominant = p
                .sectors
                .iter()
                .fold(None::<(&String, usize)>, |best, (s, &c)| match best {
                    Some((_, bc)) if bc >= c => best,
                    _ => Some((s, c)),
                })
                .map(|(s, _)| s.clone())
                .unwrap_or_default();
            r.push(dominant);
            r
        })
        .collect();
    Table {
        title: format!("KMeans cluster profiles (k = {})", rep.kmeans.k),
        header,
        rows,
    }
}

pub fn model_selection_table(rep: &ClusterReport) -> Table {
    let mut rows: Vec<Vec<String>> = rep
        .elbow
        .points
        .iter()
        .map(|p| {
            vec![
                p.k.to_string(),
                format!("{:.4}", p.inertia),
                String::new(),
                String::new(),
            ]
        })
        .collect();
    for b in &rep.bic.curve {
        match rows.iter_mut().find(|r| r[0] == b.k.to_string()) {
            Some(r) => {
                r[2] = format!("{:.4}", b.bic);
                r[3] = format!("{:.4}", b.log_likelihood);
            }
            None => rows.push(vec![
                b.k.to_string(),
                String::new(),
                format!("{:.4}", b.bic),
                format!("{:.4}", b.log_likelihood),
            ]),
        }
    }
    Table {
        title: "Model selection".into(),
        header: ["k", "KMeans inertia", "GMM BIC", "GMM log-likelihood"]
            .map(String::from)
            .to_vec(),
        rows,
    }
}

pub fn render_tables(
    stats: &StatsBundle,
    cluster: Option<&ClusterReport>,
) -> Result<Vec<Artifact>, ReportError> {
    let mut out = Vec::new();
    out.extend(distribution_table(&stats.distributions).artifacts("global_distribution")?);
    out.extend(correlation_table(&stats.correlation).artifacts("correlation")?);
    for t in &stats.crosstabs {
        out.extend(crosstab_table(t).artifacts(&crosstab_stem(t))?);
    }
    if let Some(rep) = cluster {
        out.extend(cluster_profile_table(rep).artifacts("cluster_profiles")?);
        out.extend(model_selection_table(rep).artifacts("model_selection")?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markdown_layout() {
        let t = Table {
            title: "T".into(),
            header: vec!["a".into(), "b|c".into()],
            rows: vec![vec!["x".into(), "20 (66.7%)".into()]],
        };
        assert_eq!(
            t.to_markdown(),
            "### T\n\n| a | b\\|c |\n| :--- | ---: |\n| x | 20 (66.7%) |\n"
        );
        assert_eq!(t.to_csv().unwrap(), b"a,b|c\nx,20 (66.7%)\n");
    }
}
