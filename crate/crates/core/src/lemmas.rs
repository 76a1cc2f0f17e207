//! Property checks for the intermediate claims of the structure argument,
//! evaluated on concrete instances. Each failure is reported as a
//! serializable counterexample.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::exec::{self, Exec};
use crate::intervals::critical_points;
use crate::levels::{IndexSetReport, LevelDecomposition, SATISFIED_DENSITY};
use crate::plfn::Interval;
use crate::structure::{
    check_grounded_bounds, is_grounded, Analysis, CanonicalCollection, Classification, Side, Terminals, DECAY,
};

/// Cap on the endpoints used to build test intervals for the rigidity check.
pub const RIGIDITY_POINTS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    /// Thin `E_k` inside an interval forces a neighbouring band above 80%.
    Rigidity,
    /// Maximal terminal lengths of separated indices differ by a factor 3.
    IntervalGrowth,
    /// Superlevel and sublevel mass bounds on grounded intervals.
    GroundedBounds,
    /// A right-chain index below a left-chain index forces a long final
    /// left-terminal interval.
    NoGaps,
    /// Right-terminal lengths above a right-chain index decay or exceed 1/2.
    DecayingRight,
    /// Right-chain indices up to `M` have right-terminal intervals.
    EndInterval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub lemma: Lemma,
    pub indices: Vec<i64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub interval: Option<Interval>,
    pub values: Vec<f64>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    /// Number of instances checked per lemma.
    pub checked: BTreeMap<Lemma, usize>,
    pub counterexamples: Vec<Counterexample>,
    /// False when `#S ≥ 0.01M`, in which case the chain lemmas are skipped.
    pub chain_lemmas_applicable: bool,
}

impl LemmaReport {
    fn absorb(&mut self, lemma: Lemma, (checked, found): (usize, Vec<Counterexample>)) {
        *self.checked.entry(lemma).or_default() += checked;
        self.counterexamples.extend(found);
    }
}

type Outcome = (usize, Vec<Counterexample>);

/// Indices with a nonempty level set that lie in `𝒫`.
fn occupied_in_p(d: &LevelDecomposition, sat: &IndexSetReport) -> Vec<i64> {
    d.occupied().filter(|&k| sat.in_p(k)).collect()
}

/// Evenly thinned copy of `pts` keeping both ends.
fn thin(pts: Vec<f64>, cap: usize) -> Vec<f64> {
    if pts.len() <= cap {
        return pts;
    }
    let n = pts.len() - 1;
    let mut out: Vec<f64> = (0..cap).map(|i| pts[i * n / (cap - 1)]).collect();
    out.dedup();
    out
}

/// For `k ∈ 𝒫` and `I` with `0.01|I| ≤ |E_k ∩ I| ≤ 0.1|I|`, one neighbouring
/// band covers more than `0.8|I|`. Test intervals are the canonical spans
/// plus all intervals between (thinned) endpoints of the three bands.
pub fn check_rigidity(d: &LevelDecomposition, sat: &IndexSetReport, coll: &CanonicalCollection, exec: Exec) -> Outcome {
    let ks = occupied_in_p(d, sat);
    let per_k = exec::map_collect(exec, &ks, |&k| {
        let sets = [d.level(k - 1), d.level(k), d.level(k + 1)];
        let pts = thin(critical_points(d.domain(), &[&sets[0], &sets[1], &sets[2]]), RIGIDITY_POINTS);
        let mut intervals: Vec<Interval> = coll.get(k).iter().map(|c| c.span).collect();
        for (i, &a) in pts.iter().enumerate() {
            intervals.extend(pts[i + 1..].iter().map(|&b| Interval::new(a, b)));
        }
        let mut checked = 0;
        let mut found = Vec::new();
        for iv in intervals {
            let len = iv.measure();
            let ek = sets[1].measure_in(iv.lo, iv.hi);
            if !(len > 0.0 && SATISFIED_DENSITY * len <= ek && ek <= 0.1 * len) {
                continue;
            }
            checked += 1;
            let lower = sets[0].measure_in(iv.lo, iv.hi);
            let upper = sets[2].measure_in(iv.lo, iv.hi);
            if !(lower > 0.8 * len || upper > 0.8 * len) {
                found.push(Counterexample {
                    lemma: Lemma::Rigidity,
                    indices: vec![k],
                    interval: Some(iv),
                    values: vec![ek, lower, upper, len],
                    message: "neither neighbouring band exceeds 0.8|I|".into(),
                });
            }
        }
        (checked, found)
    });
    merge(per_k)
}

fn merge(parts: Vec<Outcome>) -> Outcome {
    parts.into_iter().fold((0, Vec::new()), |(n, mut v), (m, w)| {
        v.extend(w);
        (n + m, v)
    })
}

/// Maximal terminal lengths of indices at distance more than one, at least
/// one of them unsatisfied, differ by more than a factor 3 (on each side).
pub fn check_interval_growth(sat: &IndexSetReport, terms: &Terminals) -> Outcome {
    let mut checked = 0;
    let mut found = Vec::new();
    for (side, map) in [(Side::Left, &terms.left), (Side::Right, &terms.right)] {
        let list: Vec<_> = map.values().collect();
        for (i, a) in list.iter().enumerate() {
            for b in &list[i + 1..] {
                if b.k - a.k <= 1 || (sat.is_satisfied(a.k) && sat.is_satisfied(b.k)) {
                    continue;
                }
                checked += 1;
                let (lo, hi) = if a.tau <= b.tau { (a.tau, b.tau) } else { (b.tau, a.tau) };
                if !(hi > DECAY * lo) {
                    found.push(Counterexample {
                        lemma: Lemma::IntervalGrowth,
                        indices: vec![a.k, b.k],
                        interval: None,
                        values: vec![a.tau, b.tau],
                        message: format!("{side:?} maximal terminal lengths within a factor 3"),
                    });
                }
            }
        }
    }
    (checked, found)
}

/// Grounded intervals for `k ∈ 𝒫`: from the domain start or the end of a
/// span, to the next span start and to the end of the longest run of
/// bottom-heavy spans.
pub fn grounded_candidates(d: &LevelDecomposition, coll: &CanonicalCollection, k: i64) -> Vec<Interval> {
    let dom = d.domain();
    let spans = coll.get(k);
    let mut out = Vec::new();
    let starts = std::iter::once((dom.lo, 0)).chain(spans.iter().enumerate().map(|(i, c)| (c.span.hi, i + 1)));
    for (a, first) in starts {
        let next = spans.get(first).map_or(dom.hi, |c| c.span.lo);
        if a < next {
            out.push(Interval::new(a, next));
        }
        let run = spans[first..].iter().take_while(|c| c.classification == Classification::BottomHeavy).count();
        if run > 0 {
            let end = spans.get(first + run).map_or(dom.hi, |c| c.span.lo);
            if a < end {
                out.push(Interval::new(a, end));
            }
        }
    }
    out.retain(|&j| is_grounded(d, coll, j, k));
    out
}

/// Both mass bounds on every candidate grounded interval.
pub fn check_grounded(d: &LevelDecomposition, sat: &IndexSetReport, coll: &CanonicalCollection, exec: Exec) -> Outcome {
    let ks = occupied_in_p(d, sat);
    let per_k = exec::map_collect(exec, &ks, |&k| {
        let mut checked = 0;
        let mut found = Vec::new();
        for j in grounded_candidates(d, coll, k) {
            let Ok(b) = check_grounded_bounds(d, coll, sat, j, k) else { continue };
            checked += 1;
            if !b.passes {
                found.push(Counterexample {
                    lemma: Lemma::GroundedBounds,
                    indices: vec![k],
                    interval: Some(j),
                    values: vec![b.lhs1, b.rhs1, b.lhs2, b.rhs2],
                    message: "grounded mass bounds fail".into(),
                });
            }
        }
        (checked, found)
    });
    merge(per_k)
}

/// A left-chain index above a right-chain index has left-terminal length
/// above 1/3 and is the last element of the chain.
pub fn check_no_gaps(a: &Analysis) -> Outcome {
    let mut checked = 0;
    let mut found = Vec::new();
    let last = a.gl.last().map(|t| t.k);
    for &b in &a.gr {
        for t in a.gl.iter().filter(|t| t.k > b) {
            checked += 1;
            if !(t.tau > 1.0 / 3.0 && Some(t.k) == last) {
                found.push(Counterexample {
                    lemma: Lemma::NoGaps,
                    indices: vec![b, t.k],
                    interval: None,
                    values: vec![t.tau],
                    message: "left-chain index above a right-chain index is short or not last".into(),
                });
            }
        }
    }
    (checked, found)
}

/// For `m ∈ 𝒢_R` with a right-terminal interval and `k > m + 1`:
/// `3τ_k < τ_m` or `τ_k > 1/2`.
pub fn check_decaying_right(a: &Analysis) -> Outcome {
    let mut checked = 0;
    let mut found = Vec::new();
    for &m in &a.gr {
        let Some(tm) = a.terminals.right.get(&m) else { continue };
        for (&k, tk) in a.terminals.right.range(m + 2..) {
            checked += 1;
            if !(DECAY * tk.tau < tm.tau || tk.tau > 0.5) {
                found.push(Counterexample {
                    lemma: Lemma::DecayingRight,
                    indices: vec![m, k],
                    interval: None,
                    values: vec![tm.tau, tk.tau],
                    message: "right-terminal length neither decays by 3 nor exceeds 1/2".into(),
                });
            }
        }
    }
    (checked, found)
}

/// Every `k ∈ 𝒢_R` with `k ≤ M` has a right-terminal interval.
pub fn check_end_interval(a: &Analysis) -> Outcome {
    let m = a.decomposition.m();
    let mut checked = 0;
    let mut found = Vec::new();
    for &k in a.gr.iter().filter(|&&k| k <= m) {
        checked += 1;
        if !a.terminals.right.contains_key(&k) {
            found.push(Counterexample {
                lemma: Lemma::EndInterval,
                indices: vec![k],
                interval: None,
                values: vec![],
                message: "right-chain index without a right-terminal interval".into(),
            });
        }
    }
    (checked, found)
}

/// Runs every check. The chain lemmas are only meaningful when `#S < 0.01M`,
/// which is the setting in which they are stated.
pub fn check_lemmas(a: &Analysis, exec: Exec) -> LemmaReport {
    let d = &a.decomposition;
    let mut r = LemmaReport::default();
    r.absorb(Lemma::Rigidity, check_rigidity(d, &a.satisfied, &a.canonical, exec));
    r.absorb(Lemma::IntervalGrowth, check_interval_growth(&a.satisfied, &a.terminals));
    r.absorb(Lemma::GroundedBounds, check_grounded(d, &a.satisfied, &a.canonical, exec));
    r.chain_lemmas_applicable = (a.satisfied.satisfied.len() as f64) < SATISFIED_DENSITY * d.m() as f64;
    if r.chain_lemmas_applicable {
        r.absorb(Lemma::NoGaps, check_no_gaps(a));
        r.absorb(Lemma::DecayingRight, check_decaying_right(a));
        r.absorb(Lemma::EndInterval, check_end_interval(a));
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levels::decompose;
    use crate::plfn::PLFunction;
    use crate::structure::{maximal_terminal, TerminalInterval};

    fn no_satisfied(p_upper: i64) -> IndexSetReport {
        IndexSetReport {
            satisfied: vec![],
            unsatisfied_pairs: (0..=p_upper).collect(),
            witness_intervals: BTreeMap::new(),
            lattice_grid_disagreements: vec![],
            p_upper,
        }
    }

    #[test]
    fn thinning_keeps_ends() {
        let pts: Vec<f64> = (0..100).map(f64::from).collect();
        let t = thin(pts, 10);
        assert_eq!((t[0], *t.last().unwrap()), (0.0, 99.0));
        assert!(t.len() <= 10);
    }

    #[test]
    fn growth_flags_close_lengths() {
        let t = |k, tau| TerminalInterval { k, side: Side::Left, tau, strict_tau: tau, mass: 0.0, maximal: true };
        let mut terms = Terminals::default();
        terms.left.insert(0, t(0, 0.1));
        terms.left.insert(2, t(2, 0.2));
        terms.left.insert(3, t(3, 0.9));
        let (checked, found) = check_interval_growth(&no_satisfied(5), &terms);
        assert_eq!(checked, 2);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].indices, vec![0, 2]);
        let json = serde_json::to_string(&found[0]).unwrap();
        assert!(json.contains("\"lemma\":\"interval_growth\""), "{json}");
    }

    #[test]
    fn rigidity_flags_an_unsupported_thin_interval() {
        // band 1 is thin inside [0, 1] and neither neighbour dominates; with
        // every index declared unsatisfied the check must object
        let g = PLFunction::new([(0.0, 0.0), (0.45, 0.9), (0.5, 1.1), (0.55, 2.2), (1.0, 2.5)]).unwrap();
        let d = decompose(&g, 1.0).unwrap();
        let coll = CanonicalCollection::build(&d, &[0, 1, 2], Exec::Sequential);
        let (checked, found) = check_rigidity(&d, &no_satisfied(4), &coll, Exec::Sequential);
        assert!(checked > 0);
        assert!(found.iter().any(|c| c.indices == vec![1]));
    }

    #[test]
    fn grounded_candidates_are_grounded() {
        let g = PLFunction::new([(0.0, 0.0), (0.3, 1.5), (0.35, 0.5), (0.8, 0.5), (1.0, 3.0)]).unwrap();
        let d = decompose(&g, 1.0).unwrap();
        let coll = CanonicalCollection::build(&d, &[0, 1, 2], Exec::Sequential);
        for k in 0..3 {
            for j in grounded_candidates(&d, &coll, k) {
                assert!(is_grounded(&d, &coll, j, k));
            }
        }
        assert!(maximal_terminal(&d, 0, Side::Left).is_some());
    }

    fn steep_left() -> Analysis {
        let g = crate::generators::gen_log_boundary(5.0, -640.0, 0.005, Side::Left, 64).unwrap();
        crate::structure::analyze(&g, 0.005, &crate::levels::SearchOptions::default()).unwrap()
    }

    fn right(k: i64, tau: f64) -> TerminalInterval {
        TerminalInterval { k, side: Side::Right, tau, strict_tau: tau, mass: 0.0, maximal: true }
    }

    #[test]
    fn chain_checks_on_a_perturbed_analysis() {
        let mut a = steep_left();
        assert!(check_lemmas(&a, Exec::Sequential).chain_lemmas_applicable);
        // the left chain runs past index 5 with short lengths
        a.gr = vec![5];
        let (checked, found) = check_no_gaps(&a);
        let last = a.gl.last().unwrap();
        let exempt = usize::from(last.tau > 1.0 / 3.0);
        assert_eq!(checked, a.gl.iter().filter(|t| t.k > 5).count());
        assert_eq!(found.len(), checked - exempt);
        assert!(found.iter().all(|c| c.indices[0] == 5 && c.indices[1] > 5));
        a.terminals.right.clear();
        assert_eq!(check_end_interval(&a).1.len(), 1);
        a.terminals.right.insert(5, right(5, 0.1));
        assert_eq!(check_end_interval(&a), (1, vec![]));
        a.terminals.right.insert(8, right(8, 0.05));
        let (checked, found) = check_decaying_right(&a);
        assert_eq!((checked, found[0].indices.clone()), (1, vec![5, 8]));
        a.terminals.right.insert(8, right(8, 0.01));
        assert_eq!(check_decaying_right(&a), (1, vec![]));
        a.terminals.right.insert(9, right(9, 0.6));
        assert_eq!(check_decaying_right(&a), (2, vec![]));
    }
}
