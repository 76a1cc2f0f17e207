//! Logarithmic-singularity witnesses: verification and the two-case search.

use serde::{Deserialize, Serialize};

use super::canonical::{end_measure, Side, TerminalInterval, Terminals, DECAY, TERMINAL_DENSITY};
use crate::error::{Error, Result};
use crate::levels::{IndexSetReport, LevelDecomposition, SATISFIED_DENSITY};

/// Left/right length ratio beyond which one end clearly dominates.
pub const DICHOTOMY: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WitnessSide {
    GrowthNear1,
    GrowthNear0,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessEntry {
    pub k: i64,
    pub tau: f64,
}

/// Indices `k_0 < … < k_m` with lengths `τ_0 > 3τ_1 > … `.
///
/// Near 1, entry `i` pairs `k_i` with `τ_i`; near 0 it pairs `k_i` with
/// `τ_{m-i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub side: WitnessSide,
    pub entries: Vec<WitnessEntry>,
    #[serde(rename = "M")]
    pub m: i64,
}

impl Witness {
    /// Pairs `(k_i, length used for k_i)` in index order.
    pub fn paired(&self) -> Vec<(i64, f64)> {
        let n = self.entries.len();
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| match self.side {
                WitnessSide::GrowthNear1 => (e.k, e.tau),
                WitnessSide::GrowthNear0 => (e.k, self.entries[n - 1 - i].tau),
            })
            .collect()
    }
}

/// Whether `(k, τ)` meets the full/empty conditions for `side`.
pub fn entry_holds(d: &LevelDecomposition, side: WitnessSide, k: i64, tau: f64) -> bool {
    let domain = d.domain();
    if !(tau > 0.0 && tau <= domain.measure()) {
        return false;
    }
    let m = d.m();
    let (full_side, others) = match side {
        WitnessSide::GrowthNear1 => (Side::Right, [k - m - 1, k - m, k - m + 1]),
        WitnessSide::GrowthNear0 => (Side::Left, [k + m - 1, k + m, k + m + 1]),
    };
    let empty_side = match full_side {
        Side::Left => Side::Right,
        Side::Right => Side::Left,
    };
    let full = d.level_ref(k).map_or(0.0, |e| end_measure(e, domain, full_side, tau));
    full > TERMINAL_DENSITY * tau
        && others.iter().all(|&j| {
            let near = end_measure(&d.neighbors(j), domain, empty_side, tau);
            tau - near > TERMINAL_DENSITY * tau
        })
}

/// Reasons a witness fails; empty when it is valid.
pub fn witness_failures(d: &LevelDecomposition, w: &Witness) -> Vec<String> {
    let mut out = Vec::new();
    let n = w.entries.len();
    if w.m != d.m() {
        out.push(format!("witness built for M={} but decomposition has M={}", w.m, d.m()));
    }
    if n == 0 || (n - 1) as f64 <= 0.1 * w.m as f64 {
        out.push(format!("m={} does not exceed 0.1M={}", n.saturating_sub(1), 0.1 * w.m as f64));
    }
    for (i, p) in w.entries.windows(2).enumerate() {
        if p[0].k >= p[1].k {
            out.push(format!("indices not increasing at {i}: {} then {}", p[0].k, p[1].k));
        }
        if !(p[0].tau > DECAY * p[1].tau) {
            out.push(format!("lengths not decaying by 3 at {i}: {} then {}", p[0].tau, p[1].tau));
        }
    }
    for (k, tau) in w.paired() {
        if !entry_holds(d, w.side, k, tau) {
            out.push(format!("full/empty conditions fail for k={k}, tau={tau}"));
        }
    }
    out
}

pub fn verify_witness(d: &LevelDecomposition, w: &Witness) -> bool {
    witness_failures(d, w).is_empty()
}

/// Outcome of the witness search, with the diagnostics of every attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessSearch {
    pub witness: Option<Witness>,
    /// 1 when `#𝒢_L < 0.9M`, 2 otherwise.
    pub case: u8,
    /// Second-largest index of `𝒢_L` (case 2 only).
    pub ell: Option<i64>,
    pub diagnostics: Vec<String>,
}

/// Keeps the parity class with more members, preferring even on ties.
fn larger_parity(ks: Vec<i64>) -> Vec<i64> {
    let (even, odd): (Vec<i64>, Vec<i64>) = ks.into_iter().partition(|k| k.rem_euclid(2) == 0);
    if odd.len() > even.len() {
        odd
    } else {
        even
    }
}

/// Greedy chain over `(k, τ)` sorted by `k`, keeping each pair whose length
/// beats the last kept one by the decay factor in the given direction.
fn greedy_chain(pairs: &[(i64, f64)], decreasing: bool) -> Vec<(i64, f64)> {
    let mut out: Vec<(i64, f64)> = Vec::new();
    for &(k, tau) in pairs {
        let ok = match out.last() {
            None => true,
            Some(&(_, last)) if decreasing => last > DECAY * tau,
            Some(&(_, last)) => tau > DECAY * last,
        };
        if ok {
            out.push((k, tau));
        }
    }
    out
}

/// Builds a witness from `(k, own length)` pairs, dropping entries that fail
/// the per-entry conditions before chaining.
fn assemble(d: &LevelDecomposition, side: WitnessSide, mut pairs: Vec<(i64, f64)>) -> Witness {
    pairs.sort_by_key(|p| p.0);
    pairs.retain(|&(k, tau)| entry_holds(d, side, k, tau));
    let chain = greedy_chain(&pairs, side == WitnessSide::GrowthNear1);
    let entries = match side {
        WitnessSide::GrowthNear1 => chain.iter().map(|&(k, tau)| WitnessEntry { k, tau }).collect(),
        WitnessSide::GrowthNear0 => {
            let taus: Vec<f64> = chain.iter().rev().map(|p| p.1).collect();
            chain.iter().zip(taus).map(|(&(k, _), tau)| WitnessEntry { k, tau }).collect()
        }
    };
    Witness { side, entries, m: d.m() }
}

fn case_one(d: &LevelDecomposition, gr: &[i64], terms: &Terminals, diag: &mut Vec<String>) -> Vec<Witness> {
    let m = d.m();
    let ks: Vec<i64> = gr
        .iter()
        .copied()
        .filter(|&k| (1..=m).contains(&k))
        .filter(|&k| terms.get(k, Side::Right).is_some_and(|t| t.tau < 0.5))
        .collect();
    let w = larger_parity(ks);
    diag.push(format!("case 1: {} right-chain candidates after parity filter", w.len()));
    let pairs = w.iter().map(|&k| (k, terms.right[&k].strict_tau)).collect();
    vec![assemble(d, WitnessSide::GrowthNear1, pairs)]
}

fn case_two(
    d: &LevelDecomposition,
    sat: &IndexSetReport,
    gl: &[TerminalInterval],
    gr: &[i64],
    terms: &Terminals,
    diag: &mut Vec<String>,
) -> (Option<i64>, Vec<Witness>) {
    let m = d.m();
    let ell = (gl.len() >= 2).then(|| gl[gl.len() - 2].k);
    let floor = ell.map_or(i64::MIN, |l| l + 1);
    let in_gr = |k: i64| gr.binary_search(&k).is_ok() || k > sat.p_upper;
    let ks: Vec<i64> = gl
        .iter()
        .map(|t| t.k)
        .filter(|&k| k + m >= floor && sat.in_p(k) && sat.in_p(k + m) && in_gr(k + m))
        .collect();
    let w = larger_parity(ks);
    let mut near0 = Vec::new();
    let mut near1 = Vec::new();
    let mut neither = 0;
    for &k in &w {
        let tl = gl.iter().find(|t| t.k == k).map_or(0.0, |t| t.strict_tau);
        let tr = terms.get(k + m, Side::Right).map_or(0.0, |t| t.strict_tau);
        if tl > DICHOTOMY * tr {
            near0.push((k, tl));
        } else if DICHOTOMY * tl < tr {
            near1.push((k + m, tr));
        } else {
            neither += 1;
        }
    }
    diag.push(format!(
        "case 2: ell={ell:?}, {} candidates, {} near 0, {} near 1, {} undecided",
        w.len(),
        near0.len(),
        near1.len(),
        neither
    ));
    let near0_wins = near0.len() > near1.len();
    let a = assemble(d, WitnessSide::GrowthNear0, near0);
    let b = assemble(d, WitnessSide::GrowthNear1, near1);
    let order = if near0_wins { vec![a, b] } else { vec![b, a] };
    (ell, order)
}

/// The two-case witness search.
///
/// The case chosen by `#𝒢_L` is tried first, majority side before minority
/// side; the other case is tried afterwards so that a verifying witness is
/// found whenever one of the constructions yields it.
pub fn find_witness(
    d: &LevelDecomposition,
    sat: &IndexSetReport,
    gl: &[TerminalInterval],
    gr: &[i64],
    terms: &Terminals,
) -> Result<WitnessSearch> {
    let m = d.m();
    if sat.satisfied.len() as f64 >= SATISFIED_DENSITY * m as f64 {
        return Err(Error::Precondition(format!(
            "#S = {} is not below 0.01M = {}",
            sat.satisfied.len(),
            0.01 * m as f64
        )));
    }
    let mut diagnostics = Vec::new();
    let case = if (gl.len() as f64) < 0.9 * m as f64 { 1 } else { 2 };
    let (ell, two) = case_two(d, sat, gl, gr, terms, &mut diagnostics);
    let one = case_one(d, gr, terms, &mut diagnostics);
    let attempts = if case == 1 { one.into_iter().chain(two) } else { two.into_iter().chain(one) };
    let mut witness = None;
    for w in attempts {
        let fails = witness_failures(d, &w);
        if fails.is_empty() {
            witness = Some(w);
            break;
        }
        diagnostics.push(format!("{:?} attempt with {} entries rejected: {}", w.side, w.entries.len(), fails.join("; ")));
    }
    Ok(WitnessSearch { witness, case, ell, diagnostics })
}
