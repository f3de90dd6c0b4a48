//! Lloyd's algorithm with k-means++ seeding and best-of-restarts selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::sq_dist;
use super::{ClusterError, Matrix};

pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansFit {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
    pub iterations: usize,
    /// Empty clusters reseeded with the farthest point during the winning run.
    pub empty_cluster_repairs: usize,
    pub seed: u64,
    pub n_restarts: usize,
    pub best_restart: usize,
    pub restart_inertias: Vec<f64>,
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = sq_dist(point, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: first center uniform, the rest drawn proportional to
/// squared distance to the nearest chosen center.
pub(crate) fn plus_plus(x: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = x.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(x.row(i), x.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(next)));
        }
    }
    x.select_rows(&chosen)
}

pub(crate) struct LloydResult {
    pub assignments: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
    pub iterations: usize,
    pub repairs: usize,
}

/// Lloyd iterations from the given centroids until assignments settle.
pub(crate) fn lloyd(x: &Matrix, mut centroids: Matrix, max_iter: usize) -> LloydResult {
    let (n, d, k) = (x.rows(), x.cols(), centroids.rows());
    let mut assignments = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    let mut repairs = 0;
    let mut iterations = 0;
    loop {
        let mut changed = false;
        for i in 0..n {
            let (mut c, dist) = nearest(x.row(i), &centroids);
            // on equal distance keep the current cluster, so duplicates settle
            if assignments[i] < k && sq_dist(x.row(i), centroids.row(assignments[i])) <= dist {
                c = assignments[i];
            }
            dists[i] = dist;
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
        }
        // Reseed empty clusters with the point farthest from its centroid.
        let mut counts = vec![0usize; k];
        assignments.iter().for_each(|&a| counts[a] += 1);
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[assignments[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                counts[assignments[i]] -= 1;
                counts[c] = 1;
                assignments[i] = c;
                dists[i] = 0.0;
                centroids.row_mut(c).copy_from_slice(x.row(i));
                repairs += 1;
                changed = true;
            }
        }
        if !changed || iterations >= max_iter {
            break;
        }
        iterations += 1;
        let mut sums = Matrix::zeros(k, d);
        for (i, &a) in assignments.iter().enumerate() {
            for (s, v) in sums.row_mut(a).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let inv = 1.0 / count as f64;
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
    }
    let inertia = (0..n)
        .map(|i| sq_dist(x.row(i), centroids.row(assignments[i])))
        .sum();
    LloydResult {
        assignments,
        centroids,
        inertia,
        iterations,
        repairs,
    }
}

/// Best of `n_restarts` seeded runs; ties go to the earliest restart.
pub fn kmeans_fit(
    x: &Matrix,
    k: usize,
    seed: u64,
    n_restarts: usize,
) -> Result<KMeansFit, ClusterError> {
    if k == 0 || k > x.rows() {
        return Err(ClusterError::InvalidK { k, rows: x.rows() });
    }
    let n_restarts = n_restarts.max(1);
    let runs: Vec<LloydResult> = (0..n_restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(seed, r);
            lloyd(x, plus_plus(x, k, &mut rng), DEFAULT_MAX_ITER)
        })
        .collect();
    let restart_inertias: Vec<f64> = runs.iter().map(|r| r.inertia).collect();
    let best_restart = (0..runs.len())
        .min_by(|&a, &b| {
            restart_inertias[a]
                .total_cmp(&restart_inertias[b])
                .then(a.cmp(&b))
        })
        .expect("at least one restart");
    let best = runs.into_iter().nth(best_restart).expect("index in range");
    Ok(KMeansFit {
        k,
        assignments: best.assignments,
        centroids: best.centroids,
        inertia: best.inertia,
        iterations: best.iterations,
        empty_cluster_repairs: best.repairs,
        seed,
        n_restarts,
        best_restart,
        restart_inertias,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowPoint {
    pub k: usize,
    pub inertia: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowScan {
    pub points: Vec<ElbowPoint>,
    /// k with the largest second difference of inertia, if the range has an
    /// interior point.
    pub knee: Option<usize>,
}

/// Inertia for each k. Besides the seeded restarts, every k > first also
/// tries the previous k's solution plus the farthest point as a start, which
/// keeps the curve non-increasing.
pub fn elbow_scan(
    x: &Matrix,
    k_range: std::ops::RangeInclusive<usize>,
    seed: u64,
    n_restarts: usize,
) -> Result<ElbowScan, ClusterError> {
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo == 0 || hi > x.rows() || lo > hi {
        return Err(ClusterError::InvalidK {
            k: hi,
            rows: x.rows(),
        });
    }
    let mut points = Vec::new();
    let mut prev: Option<(Matrix, Vec<usize>)> = None;
    for k in k_range {
        let fit = kmeans_fit(x, k, seed, n_restarts)?;
        let mut best = (fit.inertia, fit.centroids, fit.assignments);
        if let Some((centroids, assignments)) = prev.take() {
            let far = (0..x.rows())
                .max_by(|&a, &b| {
                    let da = sq_dist(x.row(a), centroids.row(assignments[a]));
                    let db = sq_dist(x.row(b), centroids.row(assignments[b]));
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("non-empty");
            let mut rows = centroids.to_rows();
            rows.push(x.row(far).to_vec());
            let warm = lloyd(
                x,
                Matrix::from_rows(&rows).expect("fixed width"),
                DEFAULT_MAX_ITER,
            );
            if warm.inertia < best.0 {
                best = (warm.inertia, warm.centroids, warm.assignments);
            }
        }
        points.push(ElbowPoint { k, inertia: best.0 });
        prev = Some((best.1, best.2));
    }
    let knee = (1..points.len().saturating_sub(1))
        .map(|i| {
            let d2 = points[i - 1].inertia - 2.0 * points[i].inertia + points[i + 1].inertia;
            (points[i].k, d2)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(k, _)| k);
    Ok(ElbowScan { points, knee })
}
