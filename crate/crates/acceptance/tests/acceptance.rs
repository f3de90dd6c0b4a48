//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any
//! criterion fails. Runs with `cargo test -p climate-narrative-tests --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use climate_narrative::aggregate::{
    labels_from_ratios, AggregationConfig, CommitmentGlobal, Ratios, SentimentGlobal,
    SpecificityGlobal, TargetGlobal,
};
use climate_narrative::cluster::{
    adjusted_rand_index, elbow_scan, gmm_fit, kmeans_fit, select_k_bic, CovarianceKind, Matrix,
};
use climate_narrative::firms::{
    assign_cap_class, assign_emp_class, CapClass, EmpClass, JoinedRecord, Sector,
};
use climate_narrative::pipeline::{Pipeline, PipelineConfig, MANIFEST};
use climate_narrative::report::RunManifest;
use climate_narrative::stats::{analyze, spearman, Variable};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn within(elapsed: Duration, limit_s: f64, detail: String) -> Check {
    if elapsed.as_secs_f64() < limit_s {
        Ok(detail)
    } else {
        Err(format!(
            "{detail}; took {:.2} s, limit {limit_s} s",
            elapsed.as_secs_f64()
        ))
    }
}

// ---------------------------------------------------------------- aggregation

fn totality() -> Check {
    let start = Instant::now();
    let cfg = AggregationConfig::default();
    let t = cfg.sentiment_threshold;
    let tt = cfg.target_threshold;
    let mut cells = 0;
    for a in 0..=100u32 {
        for b in 0..=100u32 {
            let (x, y) = (f64::from(a) / 100.0, f64::from(b) / 100.0);
            let s = labels_from_ratios(
                &Ratios {
                    risk: x,
                    opportunity: y,
                    ..Ratios::default()
                },
                &cfg,
            )
            .sentiment;
            let candidates = [
                (SentimentGlobal::Risk, x > t && y <= t),
                (SentimentGlobal::Opportunity, y > t && x <= t),
                (SentimentGlobal::RiskOpportunity, x > t && y > t),
                (SentimentGlobal::Neutral, x <= t && y <= t),
            ];
            let held: Vec<_> = candidates.iter().filter(|c| c.1).map(|c| c.0).collect();
            if held != [s] {
                return Err(format!("sentiment at ({x}, {y}): rules {held:?}, got {s}"));
            }

            let g = labels_from_ratios(
                &Ratios {
                    netzero: x,
                    reduction: y,
                    ..Ratios::default()
                },
                &cfg,
            )
            .target;
            let candidates = [
                (TargetGlobal::Netzero, x > tt && y <= tt),
                (TargetGlobal::Reduction, y > tt && x <= tt),
                (TargetGlobal::ReductionNetzero, x > tt && y > tt),
                (TargetGlobal::NoReduction, x <= tt && y <= tt),
            ];
            let held: Vec<_> = candidates.iter().filter(|c| c.1).map(|c| c.0).collect();
            if held != [g] {
                return Err(format!("target at ({x}, {y}): rules {held:?}, got {g}"));
            }
            cells += 2;
        }
    }
    within(
        start.elapsed(),
        5.0,
        format!("{cells} grid cells, one label each"),
    )
}

fn threshold_fidelity() -> Check {
    let cfg = AggregationConfig::default();
    let cases = [
        (0.31, 0.30, SentimentGlobal::Risk),
        (0.30, 0.31, SentimentGlobal::Opportunity),
        (0.31, 0.31, SentimentGlobal::RiskOpportunity),
        (0.30, 0.30, SentimentGlobal::Neutral),
    ];
    for (risk, opportunity, want) in cases {
        let got = labels_from_ratios(
            &Ratios {
                risk,
                opportunity,
                ..Ratios::default()
            },
            &cfg,
        )
        .sentiment;
        if got != want {
            return Err(format!(
                "({risk}, {opportunity}) gave {got}, expected {want}"
            ));
        }
    }
    Ok("4 boundary pairs".into())
}

// ---------------------------------------------------------------- statistics

fn fixture_record(
    id: usize,
    s: SentimentGlobal,
    c: CommitmentGlobal,
    sp: SpecificityGlobal,
    t: TargetGlobal,
) -> JoinedRecord {
    JoinedRecord {
        firm_id: format!("F{id:04}"),
        sector: Sector::ALL[id % Sector::ALL.len()],
        sentiment: s,
        commitment: c,
        specificity: sp,
        netzero: t,
        n_paragraphs: 10,
        scope1: None,
        scope2: None,
        scope3: None,
        employees: 1000,
        market_cap: 5.0,
        cap_class: assign_cap_class(5.0),
        emp_class: assign_emp_class(1000.0),
        ei_class: None,
        ej_class: None,
        ek_class: None,
    }
}

fn expand<T: Copy>(counts: &[(T, usize)]) -> Vec<T> {
    counts.iter().flat_map(|&(v, n)| vec![v; n]).collect()
}

/// 828 records whose commitment cross-tabulations equal the published count
/// tables; the overall distributions follow from them.
fn fixture_dataset() -> Vec<JoinedRecord> {
    use SentimentGlobal as S;
    use SpecificityGlobal as Sp;
    use TargetGlobal as T;
    let groups = [
        (
            CommitmentGlobal::Commitment,
            expand(&[
                (S::Neutral, 265),
                (S::Opportunity, 23),
                (S::Risk, 423),
                (S::RiskOpportunity, 5),
            ]),
            expand(&[(Sp::General, 121), (Sp::Specific, 595)]),
            expand(&[
                (T::Netzero, 573),
                (T::NoReduction, 91),
                (T::Reduction, 19),
                (T::ReductionNetzero, 33),
            ]),
        ),
        (
            CommitmentGlobal::NoCommitment,
            expand(&[
                (S::Neutral, 74),
                (S::Opportunity, 31),
                (S::Risk, 4),
                (S::RiskOpportunity, 3),
            ]),
            expand(&[(Sp::General, 64), (Sp::Specific, 48)]),
            expand(&[
                (T::Netzero, 58),
                (T::NoReduction, 53),
                (T::Reduction, 1),
                (T::ReductionNetzero, 0),
            ]),
        ),
    ];
    let mut out = Vec::new();
    for (c, sent, spec, target) in groups {
        assert!(sent.len() == spec.len() && spec.len() == target.len());
        for i in 0..sent.len() {
            out.push(fixture_record(out.len(), sent[i], c, spec[i], target[i]));
        }
    }
    out
}

fn fixture_table() -> Check {
    let start = Instant::now();
    let records = fixture_dataset();
    let bundle = analyze(&records).map_err(|e| e.to_string())?;
    let share = |v: Variable, label: &str| -> Result<f64, String> {
        let d = bundle
            .distributions
            .iter()
            .find(|d| d.variable == v)
            .ok_or(format!("no {v} distribution"))?;
        let i = d
            .labels
            .iter()
            .position(|l| l == label)
            .ok_or(format!("no {label}"))?;
        Ok(100.0 * d.fraction(i))
    };
    let tab = bundle
        .crosstabs
        .iter()
        .find(|t| t.row_variable == Variable::Commitment && t.col_variable == Variable::Netzero)
        .ok_or("no commitment x netzero table")?;
    let (cell_n, cell_frac) = tab
        .cell("commitment", "netzero")
        .ok_or("no commitment/netzero cell")?;

    let checks = [
        (
            "commitment",
            share(Variable::Commitment, "commitment")?,
            86.5,
        ),
        (
            "specificity",
            share(Variable::Specificity, "specific")?,
            77.6,
        ),
        ("netzero", share(Variable::Netzero, "netzero")?, 76.2),
        ("Net Zero cell", 100.0 * cell_frac, 80.0),
    ];
    let mut parts = vec![format!("n={}", bundle.n_records)];
    let mut failed = Vec::new();
    for (name, got, want) in checks {
        let ok = (got - want).abs() <= 0.05;
        parts.push(format!("{name} {got:.3}% vs {want}%"));
        if !ok {
            failed.push(format!(
                "{name} {got:.3}% is {:.3} pp from {want}%",
                (got - want).abs()
            ));
        }
    }
    if cell_n != 573 {
        failed.push(format!("Net Zero cell count {cell_n}, expected 573"));
    }
    if bundle.n_records != 828 {
        failed.push(format!("{} records", bundle.n_records));
    }
    let detail = parts.join(", ");
    if failed.is_empty() {
        within(start.elapsed(), 10.0, detail)
    } else {
        Err(format!("{}; {detail}", failed.join("; ")))
    }
}

/// Rank by counting: 1 + values below + half the other ties.
fn oracle_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let below = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            1.0 + below + (equal - 1.0) / 2.0
        })
        .collect()
}

fn oracle_pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

fn spearman_oracle() -> Check {
    const PAIRS: usize = 1000;
    const SHUFFLES: usize = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_rho, mut worst_p, mut small, mut undefined) = (0.0f64, 0.0f64, 0, 0);
    for case in 0..PAIRS {
        let n = rng.random_range(3..=50);
        let levels = rng.random_range(2..=5);
        let xs: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(0..levels)))
            .collect();
        let ys: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(0..levels)))
            .collect();
        let (rx, ry) = (oracle_ranks(&xs), oracle_ranks(&ys));
        let want = oracle_pearson(&rx, &ry);
        let got = spearman(&xs, &ys).ok();
        let (want, got) = match (want, got) {
            (None, None) => {
                undefined += 1;
                continue;
            }
            (Some(w), Some(g)) => (w, g),
            (w, g) => return Err(format!("case {case}: oracle {w:?}, engine {g:?}")),
        };
        let d = (want - got.rho).abs();
        worst_rho = worst_rho.max(d);
        if d > 1e-12 {
            return Err(format!(
                "case {case} (n={n}): rho {} vs oracle {want}",
                got.rho
            ));
        }
        if n <= 10 {
            small += 1;
            let observed = want.abs();
            let mut perm = ry.clone();
            let mut hits = 0;
            for _ in 0..SHUFFLES {
                perm.shuffle(&mut rng);
                if oracle_pearson(&rx, &perm).is_some_and(|r| r.abs() >= observed - 1e-9) {
                    hits += 1;
                }
            }
            let p = hits as f64 / SHUFFLES as f64;
            let d = (p - got.pvalue).abs();
            worst_p = worst_p.max(d);
            if d > 0.02 {
                return Err(format!(
                    "case {case} (n={n}): p {} vs permutation oracle {p}",
                    got.pvalue
                ));
            }
        }
    }
    Ok(format!(
        "{PAIRS} pairs ({undefined} constant), max |drho| {worst_rho:.1e}; {small} small samples, max |dp| {worst_p:.4}"
    ))
}

fn encoding() -> Check {
    use SentimentGlobal as S;
    use TargetGlobal as T;
    let sentiment = [
        (S::Risk, 0),
        (S::RiskOpportunity, 1),
        (S::Neutral, 2),
        (S::Opportunity, 3),
    ];
    let commitment = [
        (CommitmentGlobal::NoCommitment, 0),
        (CommitmentGlobal::Commitment, 1),
    ];
    let specificity = [
        (SpecificityGlobal::General, 0),
        (SpecificityGlobal::Specific, 1),
    ];
    let target = [
        (T::NoReduction, 0),
        (T::Reduction, 1),
        (T::ReductionNetzero, 2),
        (T::Netzero, 3),
    ];
    let mut checked = 0;
    let mut bad = Vec::new();
    let mut check = |label: String, got: i64, want: i64| {
        checked += 1;
        if got != want {
            bad.push(format!("{label} -> {got}, expected {want}"));
        }
    };
    for (l, c) in sentiment {
        check(l.to_string(), l.code(), c);
    }
    for (l, c) in commitment {
        check(l.to_string(), l.code(), c);
    }
    for (l, c) in specificity {
        check(l.to_string(), l.code(), c);
    }
    for (l, c) in target {
        check(l.to_string(), l.code(), c);
    }
    if bad.is_empty() {
        Ok(format!("{checked} mappings"))
    } else {
        Err(bad.join("; "))
    }
}

fn binning() -> Check {
    let cap: [(f64, &str); 8] = [
        (1.0, "Cap_2"),
        (4.0, "Cap_3"),
        (7.24, "Cap_3"),
        (10.0, "Cap_4"),
        (20.0, "Cap_5"),
        (40.0, "Cap_6"),
        (80.0, "Cap_7"),
        (240.0, "Cap_7"),
    ];
    let emp: [(f64, &str); 8] = [
        (250.0, "Emp_02"),
        (1000.0, "Emp_03"),
        (5000.0, "Emp_04"),
        (7138.0, "Emp_04"),
        (10000.0, "Emp_05"),
        (40000.0, "Emp_06"),
        (100000.0, "Emp_07"),
        (250000.0, "Emp_07"),
    ];
    let mut bad = Vec::new();
    for (v, want) in cap {
        let got: CapClass = assign_cap_class(v);
        if got.to_string() != want {
            bad.push(format!("cap {v} -> {got}, expected {want}"));
        }
    }
    for (v, want) in emp {
        let got: EmpClass = assign_emp_class(v);
        if got.to_string() != want {
            bad.push(format!("employees {v} -> {got}, expected {want}"));
        }
    }
    if bad.is_empty() {
        Ok(format!("{} boundary values", cap.len() + emp.len()))
    } else {
        Err(bad.join("; "))
    }
}

// ---------------------------------------------------------------- clustering

/// Ten unit-variance blobs in 6-D centred on ten of the twelve vertices of
/// the cross-polytope with radius 12, so any two centres are at least 17
/// apart. Near-equal spacing keeps the inertia curve almost linear below
/// k=10; randomly placed centres make the first step dominate the second
/// difference instead.
fn blobs(n: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let mut centres: Vec<[f64; 6]> = Vec::new();
    for axis in 0..6 {
        for sign in [12.0, -12.0] {
            if axis < 4 || sign > 0.0 {
                let mut c = [0.0; 6];
                c[axis] = sign;
                centres.push(c);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let k = i % centres.len();
        rows.push(
            centres[k]
                .iter()
                .map(|m| m + noise.sample(&mut rng))
                .collect::<Vec<f64>>(),
        );
        labels.push(k);
    }
    (Matrix::from_rows(&rows).unwrap(), labels)
}

fn kmeans_recovery() -> Check {
    let start = Instant::now();
    let (x, truth) = blobs(828, 7);
    let fit = kmeans_fit(&x, 10, 42, 20).map_err(|e| e.to_string())?;
    let ari = adjusted_rand_index(&fit.assignments, &truth);
    let scan = elbow_scan(&x, 1..=15, 42, 20).map_err(|e| e.to_string())?;
    let detail = format!("ARI {ari:.4}, knee {:?}", scan.knee);
    if ari < 0.95 {
        return Err(format!("{detail}; ARI below 0.95"));
    }
    if scan.knee != Some(10) {
        return Err(format!("{detail}; knee is not 10"));
    }
    within(start.elapsed(), 30.0, detail)
}

fn gmm_bic() -> Check {
    const RUNS: u64 = 100;
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut picked_one = 0;
    let mut fits = 0;
    for run in 0..RUNS {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + run);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..6).map(|_| noise.sample(&mut rng)).collect())
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let scan =
            select_k_bic(&x, 1..=4, run, CovarianceKind::Diagonal).map_err(|e| e.to_string())?;
        if scan.best_k == 1 {
            picked_one += 1;
        }
        for k in 1..=4 {
            let fit = gmm_fit(&x, k, run, CovarianceKind::Diagonal).map_err(|e| e.to_string())?;
            fits += 1;
            if let Some(w) = fit
                .loglik_trace
                .windows(2)
                .find(|w| w[1] < w[0] - 1e-9 * w[0].abs().max(1.0))
            {
                return Err(format!(
                    "run {run}, k={k}: log-likelihood fell from {} to {}",
                    w[0], w[1]
                ));
            }
        }
    }
    let detail = format!("k=1 chosen in {picked_one}/{RUNS} runs; {fits} fits monotone");
    if picked_one >= 90 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- end to end

fn end_to_end() -> Check {
    let start = Instant::now();
    let mut runs = Vec::new();
    for _ in 0..2 {
        let (dir, cfg) = fixtures::synthetic_copy().map_err(|e| e.to_string())?;
        let cfg = PipelineConfig::load(&cfg).map_err(|e| e.to_string())?;
        Pipeline::new(cfg).run_all().map_err(|e| e.to_string())?;
        let out = dir.path().join("out");
        let manifest = RunManifest::read(&out.join(MANIFEST)).map_err(|e| e.to_string())?;
        runs.push((
            manifest.without_timestamp(),
            fixtures::read_tree(&out.join("tables")).map_err(|e| e.to_string())?,
            fixtures::read_tree(&out.join("figures")).map_err(|e| e.to_string())?,
        ));
    }
    let (a, b) = (&runs[0], &runs[1]);
    if a.0 != b.0 {
        return Err("manifests differ beyond the timestamp".into());
    }
    if a.1 != b.1 || a.2 != b.2 {
        return Err("tables or figures differ between runs".into());
    }
    within(
        start.elapsed(),
        20.0,
        format!(
            "{} tables, {} figures identical across two runs",
            a.1.len(),
            a.2.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("aggregation totality", totality),
        ("threshold fidelity", threshold_fidelity),
        ("fixture-table reproduction", fixture_table),
        ("spearman oracle equivalence", spearman_oracle),
        ("encoding exactness", encoding),
        ("binning exactness", binning),
        ("kmeans recovery", kmeans_recovery),
        ("gmm/bic sanity", gmm_bic),
        ("end-to-end determinism", end_to_end),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.2} s]"),
            Err(detail) => {
                failures += 1;
                println!("FAIL {name}: {detail} [{secs:.2} s]");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
