//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS|FAIL ...` line.

use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use deglab::corpus::{standard_corpus, CorpusEntry};
use deglab::generators::{gen_log_boundary, gen_random};
use deglab::integral::{
    integral_exact, integral_montecarlo, integral_quadrature, IntegralRequest, Square,
};
use deglab::intervals::IntervalSet;
use deglab::lemmas::{check_lemmas, Counterexample};
use deglab::levels::{pair_integral_lower_check, SearchOptions, PAIR_INTEGRAL_FLOOR, SATISFIED_DENSITY};
use deglab::structure::{
    analyze, cross_boundary_contributions, theorem_check, verify_witness, Analysis, Side, Verdict, WitnessSide,
    CONTRIBUTION_FLOOR,
};
use deglab::{Exec, Interval, PLFunction, PhaseFunction};

/// Frozen exact-engine value of `|g(1) - g(0)| / (δ ∬_{[0,1]²})` for the
/// log-boundary profile with `K = 10`, `ln β = -50`, `δ = 0.005`.
const LOG_RATIO_K10: f64 = 1405.913992722196;

/// Writes straight to stderr so the line survives the harness's output capture.
fn report(n: u32, pass: bool, detail: String) {
    let line = format!("criterion {n}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn artifact_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

struct Analyzed {
    entry: CorpusEntry,
    g: PLFunction,
    analysis: Analysis,
}

/// Every corpus function analyzed once, shared by criteria 4 to 6.
fn corpus_analyses() -> &'static [Analyzed] {
    static CELL: OnceLock<Vec<Analyzed>> = OnceLock::new();
    CELL.get_or_init(|| {
        standard_corpus()
            .into_iter()
            .map(|entry| {
                let g = entry.generate().unwrap();
                let analysis = analyze(&g, entry.delta, &SearchOptions::default())
                    .unwrap_or_else(|e| panic!("{} at {}: {e}", entry.id, entry.delta));
                Analyzed { entry, g, analysis }
            })
            .collect()
    })
}

#[test]
fn criterion_1_identity_golden_value() {
    let start = Instant::now();
    let delta: f64 = 0.01;
    let closed = 2.0 * ((2.0 - delta) / delta - (2.0 / delta).ln());
    let phi = PhaseFunction::new(PLFunction::linear(0.0, 1.0, 0.0, 1.0).unwrap()).unwrap();
    let req = IntegralRequest::phase(&phi, delta, Square::Double).unwrap();
    let exact = integral_exact(&req).value;
    let quad = integral_quadrature(&req, 1e-8).unwrap().value;
    let mc = integral_montecarlo(&req, 10_000_000, 1).unwrap();
    let elapsed = start.elapsed();
    let exact_ok = ((exact - closed) / closed).abs() <= 1e-9;
    let quad_ok = (quad - closed).abs() <= 1e-6;
    let mc_ok = (mc.value - closed).abs() <= 4.0 * mc.error_estimate;
    let time_ok = elapsed < Duration::from_secs(10);
    let pass = exact_ok && quad_ok && mc_ok && time_ok;
    report(
        1,
        pass,
        format!(
            "closed={closed:.10} exact={exact:.10} quad={quad:.10} mc={:.4}±{:.4} time={elapsed:.2?}",
            mc.value, mc.error_estimate
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_exact_vs_quadrature() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for seed in 0..200u64 {
        for delta in [0.1f64, 0.05, 0.01] {
            // range about 1 so the three deltas probe coarse to fine strips
            let m = (1.0 / delta).round() as i64;
            let g = gen_random(seed, 30, m, delta).unwrap();
            let req = IntegralRequest::new(&g, delta).unwrap();
            let exact = integral_exact(&req).value;
            let q = integral_quadrature(&req, 1e-6).unwrap();
            let quad = q.value;
            let err = (exact - quad).abs();
            let tol = 1e-6 + 1e-9 * exact.abs();
            worst = worst.max(err / tol);
            if err > tol || !q.converged {
                failures.push((seed, delta, exact, quad));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(300);
    report(
        2,
        pass,
        format!("cases=600 failures={} worst_err/tol={worst:.3e} time={elapsed:.2?}", failures.len()),
    );
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_3_degree_bound_on_corpus() {
    let start = Instant::now();
    let mut min_ratio = (f64::INFINITY, String::new());
    let mut violations = Vec::new();
    let corpus = standard_corpus();
    for e in &corpus {
        let phi = PhaseFunction::new(e.generate().unwrap()).unwrap();
        let c = theorem_check(&phi, e.delta).unwrap();
        if !c.holds {
            violations.push(json!({ "function_id": e.id, "delta": e.delta, "lhs": c.lhs, "rhs": c.rhs }));
        }
        if c.ratio < min_ratio.0 {
            min_ratio = (c.ratio, format!("{} at delta={}", e.id, e.delta));
        }
    }
    let elapsed = start.elapsed();
    if !violations.is_empty() {
        std::fs::write(artifact_dir().join("degree_violations.json"), serde_json::to_string_pretty(&violations).unwrap())
            .unwrap();
    }
    let pass = violations.is_empty() && elapsed < Duration::from_secs(1800);
    report(
        3,
        pass,
        format!(
            "instances={} violations={} min_rhs/lhs={:.6e} ({}) time={elapsed:.2?}",
            corpus.len(),
            violations.len(),
            min_ratio.0,
            min_ratio.1
        ),
    );
    assert!(pass);
}

/// Re-measures a satisfied-index witness directly.
fn witness_interval_holds(a: &Analysis, k: i64) -> bool {
    let Some(w) = a.satisfied.witness_intervals.get(&k) else { return false };
    let iv = w.interval;
    let len = iv.measure();
    let d = &a.decomposition;
    let full = d.level(k).measure_in(iv.lo, iv.hi);
    let empty = d.neighbors(k).complement().measure_in(iv.lo, iv.hi);
    full > SATISFIED_DENSITY * len && empty > SATISFIED_DENSITY * len
}

#[test]
fn criterion_4_structure_verdicts() {
    let mut counts = [0usize; 3];
    let mut problems = Vec::new();
    let min_count = (SATISFIED_DENSITY * 128.0).ceil() as usize;
    for x in corpus_analyses() {
        let a = &x.analysis;
        let tag = format!("{} at delta={}", x.entry.id, x.entry.delta);
        if a.decomposition.m() != 128 || x.g.first_value() != 0.0 {
            problems.push(format!("{tag}: not a normalized M=128 input"));
        }
        match &a.verdict {
            Verdict::SatisfiedRich { count } => {
                counts[0] += 1;
                if *count < min_count || *count != a.satisfied.satisfied.len() {
                    problems.push(format!("{tag}: #S = {count}"));
                }
                for &k in &a.satisfied.satisfied {
                    if !witness_interval_holds(a, k) {
                        problems.push(format!("{tag}: witness interval for k={k} fails re-measurement"));
                    }
                }
            }
            Verdict::WitnessFound { witness } => {
                counts[1] += 1;
                if !verify_witness(&a.decomposition, witness) {
                    problems.push(format!("{tag}: witness fails verification"));
                }
            }
            Verdict::Inconclusive { diagnostics } => {
                counts[2] += 1;
                problems.push(format!("{tag}: inconclusive {diagnostics:?}"));
            }
        }
    }
    let pass = problems.is_empty();
    report(
        4,
        pass,
        format!(
            "instances={} satisfied_rich={} witness_found={} inconclusive={} problems={}",
            corpus_analyses().len(),
            counts[0],
            counts[1],
            counts[2],
            problems.len()
        ),
    );
    assert!(pass, "{problems:#?}");
}

#[test]
fn criterion_5_lemma_suites() {
    let mut found: Vec<serde_json::Value> = Vec::new();
    let mut checked = std::collections::BTreeMap::new();
    for x in corpus_analyses() {
        let r = check_lemmas(&x.analysis, Exec::Parallel);
        for (lemma, n) in r.checked {
            *checked.entry(lemma).or_insert(0usize) += n;
        }
        for c in r.counterexamples {
            found.push(persistable(&x.entry, &x.g, &c));
        }
    }
    let path = artifact_dir().join("lemma_counterexamples.json");
    if found.is_empty() {
        let _ = std::fs::remove_file(&path);
    } else {
        std::fs::write(&path, serde_json::to_string_pretty(&found).unwrap()).unwrap();
    }
    let pass = found.is_empty();
    let saved = if pass { String::new() } else { format!(" saved to {}", path.display()) };
    report(5, pass, format!("checked={checked:?} counterexamples={}{saved}", found.len()));
    assert!(pass);
}

fn persistable(e: &CorpusEntry, g: &PLFunction, c: &Counterexample) -> serde_json::Value {
    json!({
        "function_id": e.id,
        "delta": e.delta,
        "generator": e.spec,
        "breakpoints": g.breakpoints().map(|(x, y)| [x, y]).collect::<Vec<_>>(),
        "counterexample": c,
    })
}

#[test]
fn criterion_6_quantitative_checks() {
    let mut problems = Vec::new();
    let (mut pairs, mut near1, mut near0) = (0usize, 0usize, 0usize);
    let mut min_pair = f64::INFINITY;
    let mut min_near0 = f64::INFINITY;
    for x in corpus_analyses() {
        let a = &x.analysis;
        let d = &a.decomposition;
        let tag = format!("{} at delta={}", x.entry.id, x.entry.delta);
        for &k in &a.satisfied.satisfied {
            let (v, ok) = pair_integral_lower_check(d, k);
            pairs += 1;
            min_pair = min_pair.min(v);
            if !ok || v < PAIR_INTEGRAL_FLOOR {
                problems.push(format!("{tag}: pair integral for k={k} is {v}"));
            }
        }
        let integral = integral_exact(&IntegralRequest::new(&x.g, x.entry.delta).unwrap()).value;
        let count = a.satisfied.satisfied.len() as f64;
        if count > 1e4 * integral {
            problems.push(format!("{tag}: #S = {count} exceeds 1e4 * {integral}"));
        }
        if let Verdict::WitnessFound { witness } = &a.verdict {
            for c in cross_boundary_contributions(d, witness) {
                match witness.side {
                    WitnessSide::GrowthNear1 => {
                        near1 += 1;
                        if c.value.is_nan() || c.value < CONTRIBUTION_FLOOR {
                            problems.push(format!("{tag}: entry k={} contributes {}", c.k, c.value));
                        }
                    }
                    // mirrored statement, recorded for coverage
                    WitnessSide::GrowthNear0 => {
                        near0 += 1;
                        min_near0 = min_near0.min(c.value);
                    }
                }
            }
        }
    }
    let pass = problems.is_empty();
    report(
        6,
        pass,
        format!(
            "satisfied_indices={pairs} min_pair_integral={min_pair:.3e} near1_entries={near1} \
             near0_entries={near0} min_near0_contribution={min_near0:.3e} problems={}",
            problems.len()
        ),
    );
    assert!(pass, "{problems:#?}");
}

fn log_ratio(k: f64) -> f64 {
    let delta = 0.005;
    let g = gen_log_boundary(k, -50.0, delta, Side::Left, 64).unwrap();
    let integral = integral_exact(&IntegralRequest::new(&g, delta).unwrap()).value;
    (g.last_value() - g.first_value()).abs() / (delta * integral)
}

#[test]
fn criterion_7_log_boundary_ratio() {
    let ratios: Vec<f64> = [2.0, 4.0, 6.0, 8.0, 10.0].into_iter().map(log_ratio).collect();
    let last = ratios[4];
    let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
    let frozen = ((last - LOG_RATIO_K10) / LOG_RATIO_K10).abs() <= 1e-9;
    let pass = last > 100.0 && increasing && frozen;
    report(7, pass, format!("ratios(K=2..10)={ratios:?} frozen={LOG_RATIO_K10}"));
    assert!(pass);
}

const GRID: usize = 4096;

fn dyadic_set(rng: &mut ChaCha8Rng, dom: Interval) -> IntervalSet {
    let n = rng.random_range(0..6);
    let pieces: Vec<Interval> = (0..n)
        .map(|_| {
            let a = rng.random_range(0..GRID);
            let b = rng.random_range(a + 1..=GRID);
            Interval::new(a as f64 / GRID as f64, b as f64 / GRID as f64)
        })
        .collect();
    IntervalSet::new(dom, pieces)
}

fn real_set(rng: &mut ChaCha8Rng, dom: Interval) -> IntervalSet {
    let n = rng.random_range(0..6);
    let pieces: Vec<Interval> = (0..n)
        .map(|_| {
            let a: f64 = rng.random();
            let b: f64 = rng.random();
            Interval::new(a.min(b), a.max(b))
        })
        .filter(|iv| iv.lo < iv.hi)
        .collect();
    IntervalSet::new(dom, pieces)
}

fn indicator(s: &IntervalSet) -> Vec<bool> {
    (0..GRID).map(|i| s.contains_point((i as f64 + 0.5) / GRID as f64)).collect()
}

fn grid_measure(ind: &[bool]) -> f64 {
    ind.iter().filter(|&&b| b).count() as f64 / GRID as f64
}

#[test]
fn criterion_8_set_algebra() {
    let dom = Interval::new(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = Vec::new();
    // dyadic endpoints make every measure exact in binary floating point
    for case in 0..10_000 {
        let (a, b) = (dyadic_set(&mut rng, dom), dyadic_set(&mut rng, dom));
        let union = a.union(&b);
        let inter = a.intersect(&b);
        let de_morgan = union.complement() == a.complement().intersect(&b.complement())
            && inter.complement() == a.complement().union(&b.complement());
        let additive = union.measure() + inter.measure() == a.measure() + b.measure();
        let difference = a.difference(&b).measure() + inter.measure() == a.measure();
        let monotone = inter.measure() <= a.measure() && a.measure() <= union.measure();
        if !(de_morgan && additive && difference && monotone) {
            failures.push(format!("identity case {case}"));
        }
    }
    // grid oracle: each component end misclassifies at most one half cell
    let mut worst = 0.0f64;
    for case in 0..1_000 {
        let (a, b) = (real_set(&mut rng, dom), real_set(&mut rng, dom));
        let (ia, ib) = (indicator(&a), indicator(&b));
        let ops: [(IntervalSet, Vec<bool>); 3] = [
            (a.union(&b), ia.iter().zip(&ib).map(|(x, y)| *x || *y).collect()),
            (a.intersect(&b), ia.iter().zip(&ib).map(|(x, y)| *x && *y).collect()),
            (a.difference(&b), ia.iter().zip(&ib).map(|(x, y)| *x && !*y).collect()),
        ];
        for (set, ind) in &ops {
            let comps = set.components().len().max(1) as f64;
            let err = (set.measure() - grid_measure(ind)).abs();
            worst = worst.max(err / comps);
            if err > comps / GRID as f64 {
                failures.push(format!("grid case {case}: error {err}"));
            }
        }
    }
    // single intervals: the whole discrepancy is within one cell
    for case in 0..1_000 {
        let a: f64 = rng.random();
        let b: f64 = rng.random();
        let s = IntervalSet::new(dom, [Interval::new(a.min(b), a.max(b))]);
        if (s.measure() - grid_measure(&indicator(&s))).abs() > 1.0 / GRID as f64 {
            failures.push(format!("single interval case {case}"));
        }
    }
    let pass = failures.is_empty();
    report(
        8,
        pass,
        format!("identities=10000 grid_cases=4000 worst_grid_error_per_component={worst:.3e} failures={}", failures.len()),
    );
    assert!(pass, "{failures:?}");
}
