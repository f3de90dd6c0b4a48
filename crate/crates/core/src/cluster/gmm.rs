//! Gaussian mixtures fitted by EM, initialized from k-means.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::kmeans::kmeans_fit;
use super::{ClusterError, Matrix};

pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    #[default]
    Diagonal,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFit {
    pub k: usize,
    pub covariance: CovarianceKind,
    pub weights: Vec<f64>,
    pub means: Matrix,
    /// One d×d matrix per component (diagonal in diagonal mode).
    pub covariances: Vec<Matrix>,
    pub log_likelihood: f64,
    pub bic: f64,
    pub n_params: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after every E-step.
    pub loglik_trace: Vec<f64>,
    /// Number of times a variance was raised to the floor.
    pub variance_floor_hits: usize,
    /// Hard assignments (argmax responsibility).
    pub assignments: Vec<usize>,
    pub seed: u64,
}

pub fn n_params(k: usize, d: usize, kind: CovarianceKind) -> usize {
    let cov = match kind {
        CovarianceKind::Diagonal => k * d,
        CovarianceKind::Full => k * d * (d + 1) / 2,
    };
    k * d + cov + k - 1
}

struct Component {
    weight: f64,
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    /// Lower Cholesky factor of `cov`.
    chol: DMatrix<f64>,
    log_det: f64,
}

impl Component {
    fn new(weight: f64, mean: Vec<f64>, cov: DMatrix<f64>, floor_hits: &mut usize) -> Self {
        let d = mean.len();
        let mut cov = cov;
        let mut chol = cov.clone().cholesky();
        let mut bump = VARIANCE_FLOOR;
        while chol.is_none() {
            *floor_hits += 1;
            cov += DMatrix::identity(d, d) * bump;
            bump *= 10.0;
            chol = cov.clone().cholesky();
        }
        let l = chol.expect("positive definite").unpack();
        let log_det = 2.0 * (0..d).map(|j| l[(j, j)].ln()).sum::<f64>();
        Component {
            weight,
            mean,
            cov,
            chol: l,
            log_det,
        }
    }

    /// `buf` is scratch space for the forward substitution.
    fn log_density(&self, x: &[f64], buf: &mut Vec<f64>) -> f64 {
        let d = x.len();
        buf.clear();
        let mut sq = 0.0;
        for (i, (xi, mi)) in x.iter().zip(&self.mean).enumerate() {
            let mut v = xi - mi;
            for (j, z) in buf.iter().enumerate() {
                v -= self.chol[(i, j)] * z;
            }
            let z = v / self.chol[(i, i)];
            sq += z * z;
            buf.push(z);
        }
        -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + self.log_det + sq)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Responsibility-weighted parameter estimates. Variances below the floor
/// are raised to it; components with no mass keep their previous values.
fn m_step(
    x: &Matrix,
    resp: &[Vec<f64>],
    kind: CovarianceKind,
    previous: Option<&[Component]>,
    floor_hits: &mut usize,
) -> Vec<Component> {
    let (n, d) = (x.rows(), x.cols());
    let k = resp[0].len();
    (0..k)
        .map(|c| {
            let nk: f64 = resp.iter().map(|r| r[c]).sum();
            if nk < 1e-10 {
                if let Some(prev) = previous {
                    let p = &prev[c];
                    return Component::new(
                        nk / n as f64,
                        p.mean.clone(),
                        p.cov.clone(),
                        floor_hits,
                    );
                }
            }
            let mut mean = vec![0.0; d];
            for (i, r) in resp.iter().enumerate() {
                for (m, v) in mean.iter_mut().zip(x.row(i)) {
                    *m += r[c] * v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= nk);
            let mut cov = DMatrix::zeros(d, d);
            for (i, r) in resp.iter().enumerate() {
                let row = x.row(i);
                for a in 0..d {
                    let da = row[a] - mean[a];
                    match kind {
                        CovarianceKind::Diagonal => cov[(a, a)] += r[c] * da * da,
                        CovarianceKind::Full => {
                            for b in 0..=a {
                                cov[(a, b)] += r[c] * da * (row[b] - mean[b]);
                            }
                        }
                    }
                }
            }
            for a in 0..d {
                for b in 0..=a {
                    let v = cov[(a, b)] / nk;
                    cov[(a, b)] = v;
                    cov[(b, a)] = v;
                }
                if cov[(a, a)] < VARIANCE_FLOOR {
                    cov[(a, a)] = VARIANCE_FLOOR;
                    *floor_hits += 1;
                }
            }
            Component::new(nk / n as f64, mean, cov, floor_hits)
        })
        .collect()
}

fn e_step(x: &Matrix, comps: &[Component]) -> (f64, Vec<Vec<f64>>) {
    let mut ll = 0.0;
    let mut resp = Vec::with_capacity(x.rows());
    let mut buf = Vec::with_capacity(x.cols());
    for row in x.iter_rows() {
        let logs: Vec<f64> = comps
            .iter()
            .map(|c| c.weight.ln() + c.log_density(row, &mut buf))
            .collect();
        let total = log_sum_exp(&logs);
        ll += total;
        resp.push(logs.iter().map(|l| (l - total).exp()).collect());
    }
    (ll, resp)
}

/// EM until the log-likelihood gains less than `1e-6` or 500 iterations.
pub fn gmm_fit(
    x: &Matrix,
    k: usize,
    seed: u64,
    kind: CovarianceKind,
) -> Result<GmmFit, ClusterError> {
    let (n, d) = (x.rows(), x.cols());
    if k == 0 || k > n {
        return Err(ClusterError::InvalidK { k, rows: n });
    }
    if kind == CovarianceKind::Full && n <= k * d {
        return Err(ClusterError::TooFewRows {
            rows: n,
            needed: k * d + 1,
        });
    }
    let init = kmeans_fit(x, k, seed, 1)?;
    let hard: Vec<Vec<f64>> = init
        .assignments
        .iter()
        .map(|&a| (0..k).map(|c| if c == a { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut floor_hits = 0;
    let mut comps = m_step(x, &hard, kind, None, &mut floor_hits);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let resp = loop {
        let (ll, resp) = e_step(x, &comps);
        if let Some(&prev) = trace.last() {
            if ll - prev < DEFAULT_TOL {
                converged = true;
            }
        }
        trace.push(ll);
        if converged || iterations >= DEFAULT_MAX_ITER {
            break resp;
        }
        comps = m_step(x, &resp, kind, Some(&comps), &mut floor_hits);
        iterations += 1;
    };
    let log_likelihood = *trace.last().expect("one E-step");
    let p = n_params(k, d, kind);
    let assignments = resp
        .iter()
        .map(|r| {
            (0..k)
                .max_by(|&a, &b| r[a].total_cmp(&r[b]).then(b.cmp(&a)))
                .expect("k >= 1")
        })
        .collect();
    if floor_hits > 0 {
        log::debug!("gmm k={k}: variance floor applied {floor_hits} times");
    }
    Ok(GmmFit {
        k,
        covariance: kind,
        weights: comps.iter().map(|c| c.weight).collect(),
        means: Matrix::from_rows(&comps.iter().map(|c| c.mean.clone()).collect::<Vec<_>>())
            .expect("fixed width"),
        covariances: comps
            .iter()
            .map(|c| Matrix::from_flat(d, d, c.cov.transpose().as_slice().to_vec()))
            .collect(),
        log_likelihood,
        bic: -2.0 * log_likelihood + p as f64 * (n as f64).ln(),
        n_params: p,
        iterations,
        converged,
        loglik_trace: trace,
        variance_floor_hits: floor_hits,
        assignments,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicPoint {
    pub k: usize,
    pub bic: f64,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicScan {
    pub best_k: usize,
    pub curve: Vec<BicPoint>,
    /// k values whose fit failed, with the reason.
    pub skipped: Vec<(usize, String)>,
}

/// Fits each k and returns the BIC minimizer (smallest k on ties).
pub fn select_k_bic(
    x: &Matrix,
    k_range: std::ops::RangeInclusive<usize>,
    seed: u64,
    kind: CovarianceKind,
) -> Result<BicScan, ClusterError> {
    let mut curve = Vec::new();
    let mut skipped = Vec::new();
    for k in k_range {
        match gmm_fit(x, k, seed, kind) {
            Ok(fit) => curve.push(BicPoint {
                k,
                bic: fit.bic,
                log_likelihood: fit.log_likelihood,
            }),
            Err(e) => {
                log::warn!("gmm k={k} skipped: {e}");
                skipped.push((k, e.to_string()));
            }
        }
    }
    let best_k = curve
        .iter()
        .min_by(|a, b| a.bic.total_cmp(&b.bic).then(a.k.cmp(&b.k)))
        .map(|p| p.k)
        .ok_or(ClusterError::NoFit)?;
    Ok(BicScan {
        best_k,
        curve,
        skipped,
    })
}
