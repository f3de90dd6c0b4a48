use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::StatsError;

/// Largest sample size for which p-values come from full permutation
/// enumeration; larger samples use the t approximation.
pub const EXACT_PVALUE_MAX_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    ExactPermutation,
    StudentT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spearman {
    pub rho: f64,
    /// Two-sided.
    pub pvalue: f64,
    pub n: usize,
    pub method: PValueMethod,
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn midranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn centered(xs: &[f64]) -> Vec<f64> {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| x - mean).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pearson correlation, `None` when either input has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let dx = centered(xs);
    let dy = centered(ys);
    let (sxx, syy) = (dot(&dx, &dx), dot(&dy, &dy));
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((dot(&dx, &dy) / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Rank correlation with a two-sided p-value.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<Spearman, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < 3 {
        return Err(StatsError::TooFewObservations(n));
    }
    let rx = midranks(xs);
    let ry = midranks(ys);
    let rho = pearson(&rx, &ry).ok_or(StatsError::ZeroVariance)?;
    let (pvalue, method) = if n <= EXACT_PVALUE_MAX_N {
        (permutation_pvalue(&rx, &ry), PValueMethod::ExactPermutation)
    } else {
        (t_pvalue(rho, n), PValueMethod::StudentT)
    };
    Ok(Spearman {
        rho,
        pvalue,
        n,
        method,
    })
}

fn t_pvalue(rho: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let denom = 1.0 - rho * rho;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = rho.abs() * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    (2.0 * (1.0 - dist.cdf(t))).clamp(0.0, 1.0)
}

/// Share of orderings of `ry` whose rank covariance with `rx` is at least as
/// extreme as the observed one. Ties make many orderings identical; walking
/// the distinct orderings of the multiset keeps the same proportion.
fn permutation_pvalue(rx: &[f64], ry: &[f64]) -> f64 {
    let dx = centered(rx);
    let observed = dot(&dx, &centered(ry)).abs();
    let tol = 1e-9 * (1.0 + observed);
    let mut dy = centered(ry);
    dy.sort_by(f64::total_cmp);
    let (mut hits, mut total) = (0u64, 0u64);
    loop {
        total += 1;
        if dot(&dx, &dy).abs() >= observed - tol {
            hits += 1;
        }
        if !next_permutation(&mut dy) {
            break;
        }
    }
    hits as f64 / total as f64
}

/// Lexicographic successor; false once the sequence is the last ordering.
fn next_permutation(v: &mut [f64]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}
