//! Structure analysis of a normalized function: either many satisfied
//! indices, or a logarithmic singularity at one end of the domain.

mod canonical;
mod witness;

pub use canonical::{
    balance_tolerance, build_canonical, build_gl, build_gr, check_grounded_bounds, classify_heavy, end_distances, end_interval, end_measure, is_compatible,
    is_grounded, maximal_terminal, CanonicalCollection, CanonicalInterval, Classification, GroundedBounds, Side,
    TerminalInterval, Terminals, BALANCE_TOL, CANONICAL_DENSITY, DECAY, HEAVY_DENSITY, TERMINAL_DENSITY,
};
pub use witness::{
    entry_holds, find_witness, verify_witness, witness_failures, Witness, WitnessEntry, WitnessSearch, WitnessSide,
    DICHOTOMY,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integral::{integral_exact_with, restricted_pair_integral, IntegralRequest, Square};
use crate::levels::{decompose, satisfied_set_with, DecompositionReport, IndexSetReport, LevelDecomposition, SearchOptions, SATISFIED_DENSITY};
use crate::intervals::IntervalSet;
use crate::plfn::{Interval, PLFunction, PhaseFunction};

pub const REPORT_VERSION: u32 = 1;
/// Smallest admissible `M` for the analysis.
pub const MIN_LEVELS: i64 = 100;
/// Constant in the degree bound `|D| ≤ 10⁹ δ ∬`.
pub const DEGREE_CONSTANT: f64 = 1e9;
/// Lower bound on each witness entry's cross-boundary pair integral.
pub const CONTRIBUTION_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Verdict {
    SatisfiedRich { count: usize },
    WitnessFound { witness: Witness },
    Inconclusive { diagnostics: Vec<String> },
}

/// Every intermediate object of the analysis.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub decomposition: LevelDecomposition,
    pub satisfied: IndexSetReport,
    pub canonical: CanonicalCollection,
    pub terminals: Terminals,
    pub gl: Vec<TerminalInterval>,
    pub gr: Vec<i64>,
    pub search: Option<WitnessSearch>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrEntry {
    pub k: i64,
    pub right: Option<TerminalInterval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub report_version: u32,
    pub decomposition: DecompositionReport,
    pub satisfied: IndexSetReport,
    pub canonical: CanonicalCollection,
    #[serde(rename = "GL")]
    pub gl: Vec<TerminalInterval>,
    #[serde(rename = "GR")]
    pub gr: Vec<GrEntry>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness_search: Option<WitnessSearch>,
    pub verdict: Verdict,
}

fn check_preconditions(g: &PLFunction) -> Result<()> {
    let dom = g.domain();
    if dom != Interval::new(0.0, 1.0) {
        return Err(Error::Precondition(format!("analysis needs domain [0, 1], got [{}, {}]", dom.lo, dom.hi)));
    }
    if g.first_value() != 0.0 {
        return Err(Error::Precondition(format!("analysis needs g(0) = 0, got {}", g.first_value())));
    }
    if g.min_value() < 0.0 {
        return Err(Error::Precondition(format!("analysis needs g >= 0, minimum is {}", g.min_value())));
    }
    Ok(())
}

/// Runs the full pipeline: decomposition, satisfied indices, canonical
/// covers, terminal intervals, growth chains and the witness search.
pub fn analyze(g: &PLFunction, delta: f64, opts: &SearchOptions) -> Result<Analysis> {
    check_preconditions(g)?;
    let d = decompose(g, delta)?;
    if !d.m_exact() {
        return Err(Error::Precondition(format!("g(1)/delta = {} is not an integer", g.last_value() / delta)));
    }
    if d.m() <= MIN_LEVELS {
        return Err(Error::Precondition(format!("analysis assumes 100 < M, got M = {}", d.m())));
    }
    let satisfied = satisfied_set_with(&d, opts);
    let ks: Vec<i64> = d.occupied().collect();
    let canonical = CanonicalCollection::build(&d, &ks, opts.exec);
    let terminals = Terminals::build(&d, opts.exec);
    let gl = build_gl(&d, &satisfied, &terminals)?;
    let gr = build_gr(&satisfied, &gl);
    let count = satisfied.satisfied.len();
    let (search, verdict) = if count as f64 >= SATISFIED_DENSITY * d.m() as f64 {
        (None, Verdict::SatisfiedRich { count })
    } else {
        let s = find_witness(&d, &satisfied, &gl, &gr, &terminals)?;
        let v = match &s.witness {
            Some(w) => Verdict::WitnessFound { witness: w.clone() },
            None => Verdict::Inconclusive { diagnostics: s.diagnostics.clone() },
        };
        (Some(s), v)
    };
    Ok(Analysis { decomposition: d, satisfied, canonical, terminals, gl, gr, search, verdict })
}

impl Analysis {
    pub fn report(&self) -> AnalysisReport {
        AnalysisReport {
            report_version: REPORT_VERSION,
            decomposition: DecompositionReport::new(&self.decomposition, &self.satisfied),
            satisfied: self.satisfied.clone(),
            canonical: self.canonical.clone(),
            gl: self.gl.clone(),
            gr: self
                .gr
                .iter()
                .map(|&k| GrEntry { k, right: self.terminals.get(k, Side::Right).copied() })
                .collect(),
            witness_search: self.search.clone(),
            verdict: self.verdict.clone(),
        }
    }
}

pub fn structure_verdict(g: &PLFunction, delta: f64) -> Result<AnalysisReport> {
    structure_verdict_with(g, delta, &SearchOptions::default())
}

pub fn structure_verdict_with(g: &PLFunction, delta: f64, opts: &SearchOptions) -> Result<AnalysisReport> {
    Ok(analyze(g, delta, opts)?.report())
}

/// One witness entry's pair integral across the period boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub k: i64,
    pub tau: f64,
    pub value: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheck {
    /// `|D|`
    pub lhs: f64,
    /// `10⁹ δ ∬` over `[0,2]²`
    pub rhs: f64,
    pub holds: bool,
    pub integral: f64,
    /// `rhs / lhs`, infinite when `lhs = 0`.
    pub ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub verdict: Option<Verdict>,
    /// Why the structure analysis was not run, if it was not.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub analysis_skipped: Option<String>,
    pub contributions: Vec<Contribution>,
}

/// Pair integrals across `s = 1` of the one-period extension, for each entry.
///
/// Coordinates are centred at `s = 1` and built from the level sets of `g`
/// (the extension on `(1, 2)` is `g + Mδ`), so short lengths stay exact.
pub fn cross_boundary_contributions(d: &LevelDecomposition, w: &Witness) -> Vec<Contribution> {
    let dom = d.domain();
    let local = Interval::new(-2.0, 2.0);
    let before = |set: &IntervalSet, tau: f64| {
        let parts = end_distances(set, dom, Side::Right, tau).into_iter().map(|iv| Interval::new(-iv.hi, -iv.lo));
        IntervalSet::new(local, parts.collect::<Vec<_>>())
    };
    let after = |set: &IntervalSet, tau: f64| IntervalSet::new(local, end_distances(set, dom, Side::Left, tau));
    let window = |lo: f64, hi: f64| IntervalSet::new(local, [Interval::new(lo, hi)]);
    w.paired()
        .into_iter()
        .map(|(k, tau)| {
            let (a, b) = match w.side {
                WitnessSide::GrowthNear1 => {
                    let a = before(&d.level(k), tau);
                    let b = window(0.0, tau).difference(&after(&d.neighbors(k - w.m), tau));
                    (a, b)
                }
                WitnessSide::GrowthNear0 => {
                    let a = after(&d.level(k), tau);
                    let b = window(-tau, 0.0).difference(&before(&d.neighbors(k + w.m), tau));
                    (a, b)
                }
            };
            let value = restricted_pair_integral(&a, &b);
            Contribution { k, tau, value, passes: value >= CONTRIBUTION_FLOOR }
        })
        .collect()
}

pub fn theorem_check(phi: &PhaseFunction, delta: f64) -> Result<TheoremCheck> {
    theorem_check_with(phi, delta, &SearchOptions::default())
}

/// `|D| ≤ 10⁹ δ ∬_{[0,2]²}` plus, when the analysis applies, the witness
/// entries' cross-boundary contributions.
pub fn theorem_check_with(phi: &PhaseFunction, delta: f64, opts: &SearchOptions) -> Result<TheoremCheck> {
    if !(delta > 0.0 && delta < 0.01) {
        return Err(Error::Precondition(format!("the degree bound needs 0 < delta < 0.01, got {delta}")));
    }
    let lhs = phi.degree().abs();
    let req = IntegralRequest::phase(phi, delta, Square::Double)?;
    let integral = integral_exact_with(&req, opts.exec).value;
    let rhs = DEGREE_CONSTANT * delta * integral;
    let ratio = if lhs == 0.0 { f64::INFINITY } else { rhs / lhs };
    let mut g = phi.base().normalize();
    if phi.increment() < 0.0 {
        g = g.scale_values(-1.0);
    }
    let mut check = TheoremCheck {
        lhs,
        rhs,
        holds: lhs <= rhs,
        integral,
        ratio,
        verdict: None,
        analysis_skipped: None,
        contributions: Vec::new(),
    };
    match analyze(&g, delta, opts) {
        Ok(a) => {
            if let Verdict::WitnessFound { witness } = &a.verdict {
                check.contributions = cross_boundary_contributions(&a.decomposition, witness);
            }
            check.verdict = Some(a.verdict);
        }
        Err(e) => check.analysis_skipped = Some(e.to_string()),
    }
    Ok(check)
}
