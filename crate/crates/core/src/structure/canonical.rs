//! Canonical covers of level sets, heavy/terminal classification, grounded
//! intervals and the left/right growth chains.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::intervals::IntervalSet;
use crate::levels::{IndexSetReport, LevelDecomposition};
use crate::plfn::Interval;
use crate::sum::CompensatedSum;

/// Density of `E_k` inside a balanced canonical interval.
pub const CANONICAL_DENSITY: f64 = 0.1;
/// Share of a neighbouring band that makes a canonical interval heavy.
pub const HEAVY_DENSITY: f64 = 0.8;
/// Density of `E_k` in a terminal interval.
pub const TERMINAL_DENSITY: f64 = 0.03;
/// Growth factor between consecutive chain lengths.
pub const DECAY: f64 = 3.0;
/// Relative tolerance for the balance equality of canonical intervals.
pub const BALANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    /// `|E_{k-1} ∩ I| > 0.8|I|`: the function sits mostly one band below.
    BottomHeavy,
    /// `|E_{k+1} ∩ I| > 0.8|I|`.
    TopHeavy,
    /// The last interval, capped at the right end with strict balance.
    TerminalSlack,
    Unclassified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalInterval {
    pub k: i64,
    pub span: Interval,
    /// `|E_k ∩ span|`
    pub mass: f64,
    /// `|E_{k-1} ∩ span|`
    pub lower_mass: f64,
    /// `|E_{k+1} ∩ span|`
    pub upper_mass: f64,
    /// True when the span was capped at the domain end with strict balance.
    pub slack: bool,
    pub classification: Classification,
}

impl CanonicalInterval {
    /// `|E_k ∩ span| - 0.1|span|`.
    pub fn balance_margin(&self) -> f64 {
        self.mass - CANONICAL_DENSITY * self.span.measure()
    }
}

/// Greedy canonical cover of `E_k`, left to right.
///
/// Each interval starts at the first uncovered component and ends at the
/// first zero of `h(t) = |E_k ∩ (s,t)| - 0.1(t-s)` lying strictly inside a
/// gap, or at the domain end when `h` stays positive.
pub fn build_canonical(d: &LevelDecomposition, k: i64) -> Vec<CanonicalInterval> {
    let Some(e) = d.level_ref(k) else { return Vec::new() };
    let end = d.domain().hi;
    let comps = e.components();
    let mut out = Vec::new();
    let mut i = 0;
    while i < comps.len() {
        let s = comps[i].lo;
        let mut mass = CompensatedSum::new();
        let mut j = i;
        let (t, capped) = loop {
            mass.add(comps[j].measure());
            let q = comps[j].hi;
            let zero = q + (mass.value() - CANONICAL_DENSITY * (q - s)) / CANONICAL_DENSITY;
            match comps.get(j + 1) {
                Some(next) if zero >= next.lo => j += 1,
                Some(_) => break (zero, false),
                None if zero < end => break (zero, false),
                None => break (end, true),
            }
        };
        out.push(canonical_interval(d, k, Interval::new(s, t), capped));
        i = j + 1;
    }
    for ci in &out {
        let tol = balance_tolerance(ci.span);
        assert!(
            ci.balance_margin() >= -tol && (ci.slack || ci.balance_margin().abs() <= tol),
            "canonical balance broken for k={k}: {ci:?}"
        );
    }
    out
}

/// Slack allowed in the balance equality: relative to the span plus the
/// rounding of its endpoints, which dominates for very short spans.
pub fn balance_tolerance(span: Interval) -> f64 {
    BALANCE_TOL * span.measure() + 64.0 * f64::EPSILON * span.lo.abs().max(span.hi.abs())
}

fn canonical_interval(d: &LevelDecomposition, k: i64, span: Interval, capped: bool) -> CanonicalInterval {
    let mass = d.level_measure_in(k, span.lo, span.hi);
    let mut ci = CanonicalInterval {
        k,
        span,
        mass,
        lower_mass: d.level_measure_in(k - 1, span.lo, span.hi),
        upper_mass: d.level_measure_in(k + 1, span.lo, span.hi),
        slack: capped && mass > CANONICAL_DENSITY * span.measure(),
        classification: Classification::Unclassified,
    };
    ci.classification = classify_heavy(&ci);
    ci
}

/// Heavy classification from the stored band masses.
pub fn classify_heavy(ci: &CanonicalInterval) -> Classification {
    let len = ci.span.measure();
    if ci.slack {
        Classification::TerminalSlack
    } else if ci.lower_mass > HEAVY_DENSITY * len {
        Classification::BottomHeavy
    } else if ci.upper_mass > HEAVY_DENSITY * len {
        Classification::TopHeavy
    } else {
        Classification::Unclassified
    }
}

/// Canonical covers for a set of indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CanonicalCollection {
    pub intervals: BTreeMap<i64, Vec<CanonicalInterval>>,
}

impl CanonicalCollection {
    pub fn build(d: &LevelDecomposition, ks: &[i64], exec: Exec) -> Self {
        let lists = exec::map_collect(exec, ks, |&k| build_canonical(d, k));
        Self { intervals: ks.iter().copied().zip(lists).collect() }
    }

    pub fn get(&self, k: i64) -> &[CanonicalInterval] {
        self.intervals.get(&k).map_or(&[], Vec::as_slice)
    }
}

/// Every span is contained in `iv` or disjoint from it.
pub fn is_compatible(iv: Interval, spans: &[CanonicalInterval]) -> bool {
    spans.iter().all(|c| {
        let s = c.span;
        (iv.lo <= s.lo && s.hi <= iv.hi) || s.hi <= iv.lo || s.lo >= iv.hi
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalInterval {
    pub k: i64,
    pub side: Side,
    /// Supremum of the lengths with `|E_k ∩ end interval| > 0.03 τ`.
    pub tau: f64,
    /// A length at most `tau` where the strict density inequality holds.
    pub strict_tau: f64,
    /// `|E_k ∩ end interval of length strict_tau|`
    pub mass: f64,
    pub maximal: bool,
}

/// The end interval of length `tau` on `side`.
pub fn end_interval(domain: Interval, side: Side, tau: f64) -> Interval {
    match side {
        Side::Left => Interval::new(domain.lo, domain.lo + tau),
        Side::Right => Interval::new(domain.hi - tau, domain.hi),
    }
}

/// Components of `e` as `(near, far)` distances from the chosen end.
fn anchored(e: &IntervalSet, domain: Interval, side: Side) -> Vec<(f64, f64)> {
    match side {
        Side::Left => e.components().iter().map(|c| (c.lo - domain.lo, c.hi - domain.lo)).collect(),
        Side::Right => e.components().iter().rev().map(|c| (domain.hi - c.hi, domain.hi - c.lo)).collect(),
    }
}

/// `set ∩ end interval of length tau`, as distances from the chosen end.
///
/// Working with distances keeps very short end intervals exact even where
/// `1 - tau` rounds to 1.
pub fn end_distances(set: &IntervalSet, domain: Interval, side: Side, tau: f64) -> Vec<Interval> {
    anchored(set, domain, side)
        .into_iter()
        .take_while(|&(near, _)| near < tau)
        .map(|(near, far)| Interval::new(near, far.min(tau)))
        .filter(|iv| iv.lo < iv.hi)
        .collect()
}

/// `|set ∩ end interval of length tau|`.
pub fn end_measure(set: &IntervalSet, domain: Interval, side: Side, tau: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    for iv in end_distances(set, domain, side, tau) {
        acc.add(iv.measure());
    }
    acc.value()
}

/// The maximal terminal interval for `k` on `side`, taking the last crossing
/// of the mass function with the line `0.03 τ`.
pub fn maximal_terminal(d: &LevelDecomposition, k: i64, side: Side) -> Option<TerminalInterval> {
    let e = d.level_ref(k)?;
    let domain = d.domain();
    let len = domain.measure();
    let mut mass = CompensatedSum::new();
    let mut best = None;
    for (near, far) in anchored(e, domain, side) {
        mass.add(far - near);
        let h = mass.value() - TERMINAL_DENSITY * far;
        if h > 0.0 {
            best = Some((far, h));
        }
    }
    let (q, h) = best?;
    let crossing = q + h / TERMINAL_DENSITY;
    let tau = crossing.min(len);
    let full = |t: f64| {
        let m = end_measure(e, domain, side, t);
        (m > TERMINAL_DENSITY * t).then_some(m)
    };
    let mut strict = if crossing > len { tau } else { tau - (1e-9 * tau).min(0.5 * (tau - q)) };
    let mut found = full(strict);
    // pull back toward the last component end, where h > 0 for sure
    for _ in 0..60 {
        if found.is_some() || strict <= q {
            break;
        }
        strict = q + 0.5 * (strict - q);
        found = full(strict);
    }
    let (strict, m) = match found {
        Some(m) => (strict, m),
        None => (q, full(q)?),
    };
    Some(TerminalInterval { k, side, tau, strict_tau: strict, mass: m, maximal: true })
}

/// `J` is compatible with `𝓘_k`, starts below `(k+1)δ`, and every canonical
/// span inside it is bottom-heavy.
pub fn is_grounded(d: &LevelDecomposition, coll: &CanonicalCollection, j: Interval, k: i64) -> bool {
    let spans = coll.get(k);
    is_compatible(j, spans)
        && d.source().value_at(j.lo) < ((k + 1) as f64) * d.delta()
        && spans
            .iter()
            .filter(|c| j.lo <= c.span.lo && c.span.hi <= j.hi)
            .all(|c| c.classification == Classification::BottomHeavy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundedBounds {
    /// `|E_{>k} ∩ J|`
    pub lhs1: f64,
    /// `|E_k ∩ J| / 5`
    pub rhs1: f64,
    /// `|E_k ∩ J|`
    pub lhs2: f64,
    /// `|E_{k-1} ∩ J| / 5`
    pub rhs2: f64,
    pub passes: bool,
}

/// Superlevel and sublevel mass bounds on a grounded interval.
///
/// The strict second bound is waived when `E_k ∩ J` is null, where both sides
/// may vanish together.
pub fn check_grounded_bounds(
    d: &LevelDecomposition,
    coll: &CanonicalCollection,
    sat: &IndexSetReport,
    j: Interval,
    k: i64,
) -> Result<GroundedBounds> {
    if !sat.in_p(k) {
        return Err(Error::Precondition(format!("index {k} is not an unsatisfied triple")));
    }
    if !is_grounded(d, coll, j, k) {
        return Err(Error::Precondition(format!("[{}, {}] is not grounded for index {k}", j.lo, j.hi)));
    }
    let lhs1 = d.superlevel(k).measure_in(j.lo, j.hi);
    let lhs2 = d.level_measure_in(k, j.lo, j.hi);
    let rhs1 = lhs2 / 5.0;
    let rhs2 = d.level_measure_in(k - 1, j.lo, j.hi) / 5.0;
    let passes = lhs1 <= rhs1 && (lhs2 < rhs2 || lhs2 == 0.0);
    Ok(GroundedBounds { lhs1, rhs1, lhs2, rhs2, passes })
}

/// Maximal terminal intervals for every occupied index, on both sides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Terminals {
    pub left: BTreeMap<i64, TerminalInterval>,
    pub right: BTreeMap<i64, TerminalInterval>,
}

impl Terminals {
    pub fn build(d: &LevelDecomposition, exec: Exec) -> Self {
        let ks: Vec<i64> = d.occupied().collect();
        let pairs = exec::map_collect(exec, &ks, |&k| {
            (maximal_terminal(d, k, Side::Left), maximal_terminal(d, k, Side::Right))
        });
        let mut out = Self::default();
        for (l, r) in pairs.into_iter() {
            if let Some(l) = l {
                out.left.insert(l.k, l);
            }
            if let Some(r) = r {
                out.right.insert(r.k, r);
            }
        }
        out
    }

    pub fn get(&self, k: i64, side: Side) -> Option<&TerminalInterval> {
        match side {
            Side::Left => self.left.get(&k),
            Side::Right => self.right.get(&k),
        }
    }
}

/// The left growth chain: start at index 0, then repeatedly take the least
/// larger index of `𝒫` whose maximal left-terminal length exceeds three
/// times the current one.
pub fn build_gl(d: &LevelDecomposition, sat: &IndexSetReport, terms: &Terminals) -> Result<Vec<TerminalInterval>> {
    if d.source().first_value() != 0.0 {
        return Err(Error::Precondition(format!(
            "the left chain needs g(0) = 0, got {}",
            d.source().first_value()
        )));
    }
    let first = *terms
        .left
        .get(&0)
        .ok_or_else(|| Error::Precondition("index 0 has no left-terminal interval".into()))?;
    let mut chain = vec![first];
    loop {
        let cur = chain[chain.len() - 1];
        let next = terms
            .left
            .range(cur.k + 1..)
            .map(|(_, t)| t)
            .find(|t| sat.in_p(t.k) && t.tau > DECAY * cur.tau);
        match next {
            Some(t) => chain.push(*t),
            None => break,
        }
    }
    Ok(chain)
}

/// `𝒢_R = {k ∈ 𝒫 \ 𝒢_L : k-1 ∉ 𝒢_L}`, listed over `0..=p_upper`; every larger
/// index also belongs to it.
pub fn build_gr(sat: &IndexSetReport, gl: &[TerminalInterval]) -> Vec<i64> {
    let in_gl = |k: i64| gl.iter().any(|t| t.k == k);
    (0..=sat.p_upper).filter(|&k| sat.in_p(k) && !in_gl(k) && !in_gl(k - 1)).collect()
}
