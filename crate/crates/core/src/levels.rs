//! Discretized level sets `E_k = {g ∈ [kδ, (k+1)δ]}` and the index sets built
//! on them: neighbors, superlevel sets, full/empty tests, satisfied indices
//! and unsatisfied triples.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::integral::restricted_pair_integral;
use crate::intervals::{critical_points, IntervalSet};
use crate::plfn::{is_level, Interval, PLFunction, Segment};

/// Density used in the definition of satisfied indices.
pub const SATISFIED_DENSITY: f64 = 0.01;
/// Lower bound on the pair integral of a satisfied index.
pub const PAIR_INTEGRAL_FLOOR: f64 = 1e-4;
/// Default resolution of the uniform-grid witness search.
pub const DEFAULT_GRID: usize = 2048;

/// How flat segments lying exactly on a multiple of δ are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlatLevels {
    /// Fail with [`Error::FlatLevel`].
    #[default]
    Reject,
    /// Assign the segment to the band above it only (`k = y/δ`).
    AssignUpper,
}

#[derive(Debug, Clone)]
pub struct LevelDecomposition {
    delta: f64,
    m: i64,
    m_exact: bool,
    flat_segments: usize,
    source: PLFunction,
    sets: BTreeMap<i64, IntervalSet>,
}

/// Smallest `j` with `j·δ > y`.
fn first_level_above(y: f64, delta: f64) -> i64 {
    let mut j = (y / delta).floor() as i64 + 1;
    while ((j - 1) as f64) * delta > y {
        j -= 1;
    }
    while (j as f64) * delta <= y {
        j += 1;
    }
    j
}

/// Largest `j` with `j·δ < y`.
fn last_level_below(y: f64, delta: f64) -> i64 {
    let mut j = (y / delta).ceil() as i64 - 1;
    while ((j + 1) as f64) * delta < y {
        j += 1;
    }
    while (j as f64) * delta >= y {
        j -= 1;
    }
    j
}

/// Band index `k` with `kδ <= y < (k+1)δ`.
pub fn band_of(y: f64, delta: f64) -> i64 {
    first_level_above(y, delta) - 1
}

fn segment_bands(
    seg: &Segment,
    delta: f64,
    policy: FlatLevels,
    out: &mut BTreeMap<i64, Vec<Interval>>,
) -> Result<bool> {
    if seg.is_flat() {
        let y = seg.y0;
        let on_level = is_level(y, delta);
        if on_level && policy == FlatLevels::Reject {
            return Err(Error::FlatLevel { x0: seg.x0, x1: seg.x1, level: y });
        }
        out.entry(band_of(y, delta)).or_default().push(Interval::new(seg.x0, seg.x1));
        return Ok(on_level);
    }
    let (lo, hi) = (seg.y_min(), seg.y_max());
    let j_lo = first_level_above(lo, delta);
    let j_hi = last_level_below(hi, delta);
    let (x_lo, x_hi) = if seg.y0 < seg.y1 { (seg.x0, seg.x1) } else { (seg.x1, seg.x0) };
    // position of the lower edge of band j_lo - 1 + i
    let mut prev = x_lo;
    for b in (j_lo - 1)..=j_hi {
        let next = if b < j_hi { seg.crossing(((b + 1) as f64) * delta) } else { x_hi };
        let iv = if prev <= next { Interval::new(prev, next) } else { Interval::new(next, prev) };
        out.entry(b).or_default().push(iv);
        prev = next;
    }
    Ok(false)
}

impl LevelDecomposition {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `g(end)/δ`, rounded when `g(end)` is a multiple of δ, floored otherwise.
    pub fn m(&self) -> i64 {
        self.m
    }

    /// False when `M` was floored because `g(end)` is not a multiple of δ.
    pub fn m_exact(&self) -> bool {
        self.m_exact
    }

    pub fn flat_level_segments(&self) -> usize {
        self.flat_segments
    }

    pub fn domain(&self) -> Interval {
        self.source.domain()
    }

    pub fn source(&self) -> &PLFunction {
        &self.source
    }

    /// Occupied indices (nonempty `E_k`) in increasing order.
    pub fn occupied(&self) -> impl Iterator<Item = i64> + '_ {
        self.sets.keys().copied()
    }

    pub fn lowest(&self) -> i64 {
        self.sets.keys().next().copied().unwrap_or(0)
    }

    pub fn highest(&self) -> i64 {
        self.sets.keys().next_back().copied().unwrap_or(0)
    }

    /// `E_k`; empty for unoccupied indices.
    pub fn level(&self, k: i64) -> IntervalSet {
        self.sets.get(&k).cloned().unwrap_or_else(|| IntervalSet::empty(self.domain()))
    }

    pub fn level_ref(&self, k: i64) -> Option<&IntervalSet> {
        self.sets.get(&k)
    }

    /// `E_k ∩ [a, b]` measure.
    pub fn level_measure_in(&self, k: i64, a: f64, b: f64) -> f64 {
        self.sets.get(&k).map_or(0.0, |s| s.measure_in(a, b))
    }

    /// `N_k = E_{k-1} ∪ E_k ∪ E_{k+1}`.
    pub fn neighbors(&self, k: i64) -> IntervalSet {
        let mut acc = IntervalSet::empty(self.domain());
        for j in k - 1..=k + 1 {
            if let Some(s) = self.sets.get(&j) {
                acc = acc.union(s);
            }
        }
        acc
    }

    /// `E_{>k} = {g > (k+1)δ}` up to measure zero.
    pub fn superlevel(&self, k: i64) -> IntervalSet {
        let pieces = self.sets.range(k + 1..).flat_map(|(_, s)| s.components().iter().copied());
        IntervalSet::new(self.domain(), pieces.collect::<Vec<_>>())
    }

    /// `|E_k ∩ I| > α|I|`.
    pub fn is_full(&self, k: i64, iv: Interval, alpha: f64) -> bool {
        self.level_measure_in(k, iv.lo, iv.hi) > alpha * iv.measure()
    }

    /// `|N_k^c ∩ I| > α|I|`.
    pub fn is_empty(&self, k: i64, iv: Interval, alpha: f64) -> bool {
        self.empty_measure_in(k, iv) > alpha * iv.measure()
    }

    /// `|N_k^c ∩ I|`.
    pub fn empty_measure_in(&self, k: i64, iv: Interval) -> f64 {
        let n = self.neighbors(k);
        let inside = n.measure_in(iv.lo, iv.hi);
        // clip to the domain so intervals poking outside do not count
        let d = self.domain();
        let span = iv.hi.min(d.hi) - iv.lo.max(d.lo);
        (span.max(0.0) - inside).max(0.0)
    }
}

pub fn decompose(g: &PLFunction, delta: f64) -> Result<LevelDecomposition> {
    decompose_with(g, delta, FlatLevels::Reject)
}

pub fn decompose_with(g: &PLFunction, delta: f64, policy: FlatLevels) -> Result<LevelDecomposition> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let mut pieces: BTreeMap<i64, Vec<Interval>> = BTreeMap::new();
    let mut flat_segments = 0;
    for seg in g.segments() {
        if segment_bands(&seg, delta, policy, &mut pieces)? {
            flat_segments += 1;
        }
    }
    let domain = g.domain();
    let sets = pieces
        .into_iter()
        .map(|(k, v)| (k, IntervalSet::new(domain, v)))
        .filter(|(_, s)| !s.is_empty())
        .collect();
    let ratio = g.last_value() / delta;
    let r = ratio.round();
    let (m, m_exact) = if r * delta == g.last_value() || (ratio - r).abs() <= 1e-9 * r.abs().max(1.0) {
        (r as i64, true)
    } else {
        (ratio.floor() as i64, false)
    };
    Ok(LevelDecomposition { delta, m, m_exact, flat_segments, source: g.clone(), sets })
}

/// An interval certifying that an index is satisfied, with both margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatisfiedWitness {
    pub interval: Interval,
    /// `|E_k ∩ I| - 0.01|I|`
    pub full_margin: f64,
    /// `|N_k^c ∩ I| - 0.01|I|`
    pub empty_margin: f64,
    /// True when found by the grid search rather than the lattice search.
    pub from_grid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Uniform grid resolution for the fallback search; `None` disables it.
    pub grid: Option<usize>,
    pub exec: Exec,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { grid: Some(DEFAULT_GRID), exec: Exec::Parallel }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSetReport {
    pub satisfied: Vec<i64>,
    pub unsatisfied_pairs: Vec<i64>,
    pub witness_intervals: BTreeMap<i64, SatisfiedWitness>,
    /// Indices where the lattice and grid searches disagree.
    pub lattice_grid_disagreements: Vec<i64>,
    /// `unsatisfied_pairs` lists members of `𝒫` in `0..=p_upper`; every larger
    /// index also belongs to `𝒫`.
    pub p_upper: i64,
}

impl IndexSetReport {
    pub fn is_satisfied(&self, k: i64) -> bool {
        self.satisfied.binary_search(&k).is_ok()
    }

    /// Membership in `𝒫 = {k ≥ 0 : k-1, k, k+1 ∉ 𝒮}` for any index.
    pub fn in_p(&self, k: i64) -> bool {
        k >= 0 && !(k - 1..=k + 1).any(|j| self.is_satisfied(j))
    }
}

/// Margin pair `(|E ∩ (a,b)| - 0.01(b-a), |C ∩ (a,b)| - 0.01(b-a))`.
fn margins(e: &IntervalSet, c: &IntervalSet, a: f64, b: f64) -> (f64, f64) {
    let len = b - a;
    (
        e.measure_in(a, b) - SATISFIED_DENSITY * len,
        c.measure_in(a, b) - SATISFIED_DENSITY * len,
    )
}

fn make_witness(e: &IntervalSet, c: &IntervalSet, a: f64, b: f64, from_grid: bool) -> Option<SatisfiedWitness> {
    if !(a < b) {
        return None;
    }
    let (full_margin, empty_margin) = margins(e, c, a, b);
    (full_margin > 0.0 && empty_margin > 0.0).then_some(SatisfiedWitness {
        interval: Interval::new(a, b),
        full_margin,
        empty_margin,
        from_grid,
    })
}

/// Exact search for `I = (a, b)` that is 0.01-full for `E` and 0.01-full for `C`.
///
/// Both margins are separable and piecewise linear in `(a, b)` with kinks on
/// the endpoint lattice, so `min(margins)` attains its maximum over each
/// lattice cell either at a cell corner or where the two margins agree on a
/// cell edge. Enumerating those points decides existence.
pub fn lattice_search(domain: Interval, e: &IntervalSet, c: &IntervalSet) -> Option<SatisfiedWitness> {
    if e.is_empty() || c.is_empty() {
        return None;
    }
    let pts = critical_points(domain, &[e, c]);
    let n = pts.len();
    // slope of each margin on cell [pts[j], pts[j+1]]
    let slopes: Vec<(f64, f64)> = pts
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let se = if e.contains_point(mid) { 1.0 } else { 0.0 };
            let sc = if c.contains_point(mid) { 1.0 } else { 0.0 };
            (se - SATISFIED_DENSITY, sc - SATISFIED_DENSITY)
        })
        .collect();
    // prefix margins G(x_j) = |S ∩ (x_0, x_j)| - 0.01 (x_j - x_0)
    let mut ge = vec![0.0; n];
    let mut gc = vec![0.0; n];
    for j in 1..n {
        ge[j] = e.measure_in(pts[0], pts[j]) - SATISFIED_DENSITY * (pts[j] - pts[0]);
        gc[j] = c.measure_in(pts[0], pts[j]) - SATISFIED_DENSITY * (pts[j] - pts[0]);
    }
    // prefix differences only rank candidates; each one is re-measured
    // directly so cancellation on tiny cells cannot produce a false best
    let mut best: Option<(f64, SatisfiedWitness)> = None;
    let mut consider = |a: f64, b: f64, de: f64, dc: f64| {
        if b > a && de > 0.0 && dc > 0.0 {
            let score = de.min(dc) / (b - a);
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                if let Some(w) = make_witness(e, c, a, b, false) {
                    best = Some((w.full_margin.min(w.empty_margin) / (b - a), w));
                }
            }
        }
    };
    for i in 0..n {
        for j in i + 1..n {
            let (de, dc) = (ge[j] - ge[i], gc[j] - gc[i]);
            consider(pts[i], pts[j], de, dc);
            // a fixed at pts[i], b moving across cell j-1 .. j
            let (se, sc) = slopes[j - 1];
            if se != sc {
                let (de0, dc0) = (ge[j - 1] - ge[i], gc[j - 1] - gc[i]);
                let t = (dc0 - de0) / (se - sc);
                let len = pts[j] - pts[j - 1];
                if t > 0.0 && t < len {
                    let v = de0 + se * t;
                    consider(pts[i], pts[j - 1] + t, v, v);
                }
            }
            // b fixed at pts[j], a moving across cell i .. i+1
            let (se, sc) = slopes[i];
            if se != sc {
                let (de0, dc0) = (ge[j] - ge[i], gc[j] - gc[i]);
                // moving a right by t lowers each margin by slope * t
                let t = (de0 - dc0) / (se - sc);
                let len = pts[i + 1] - pts[i];
                if t > 0.0 && t < len {
                    let v = de0 - se * t;
                    consider(pts[i] + t, pts[j], v, v);
                }
            }
        }
    }
    best.map(|(_, w)| w)
}

/// Brute-force search over all intervals with endpoints on a uniform grid.
pub fn grid_search(domain: Interval, e: &IntervalSet, c: &IntervalSet, grid: usize) -> Option<SatisfiedWitness> {
    if e.is_empty() || c.is_empty() || grid == 0 {
        return None;
    }
    let h = domain.measure() / grid as f64;
    let xs: Vec<f64> = (0..=grid)
        .map(|i| if i == grid { domain.hi } else { domain.lo + i as f64 * h })
        .collect();
    let mut pe = vec![0.0; grid + 1];
    let mut pc = vec![0.0; grid + 1];
    for i in 0..grid {
        pe[i + 1] = pe[i] + e.measure_in(xs[i], xs[i + 1]);
        pc[i + 1] = pc[i] + c.measure_in(xs[i], xs[i + 1]);
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..grid {
        for j in i + 1..=grid {
            let len = xs[j] - xs[i];
            let de = pe[j] - pe[i] - SATISFIED_DENSITY * len;
            let dc = pc[j] - pc[i] - SATISFIED_DENSITY * len;
            if de > 0.0 && dc > 0.0 {
                let score = de.min(dc) / len;
                if best.is_none_or(|(s, _, _)| score > s) {
                    best = Some((score, i, j));
                }
            }
        }
    }
    let (_, i, j) = best?;
    make_witness(e, c, xs[i], xs[j], true)
}

/// Per-index outcome of the witness searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexSearch {
    pub k: i64,
    pub lattice: Option<SatisfiedWitness>,
    pub grid: Option<SatisfiedWitness>,
}

pub fn search_index(d: &LevelDecomposition, k: i64, opts: &SearchOptions) -> IndexSearch {
    let domain = d.domain();
    let Some(e) = d.level_ref(k) else {
        return IndexSearch { k, lattice: None, grid: None };
    };
    let c = d.neighbors(k).complement();
    let lattice = lattice_search(domain, e, &c);
    let grid = match (lattice, opts.grid) {
        (None, Some(g)) => grid_search(domain, e, &c, g),
        _ => None,
    };
    IndexSearch { k, lattice, grid }
}

/// The satisfied indices `𝒮`, their witnesses, and `𝒫`.
pub fn satisfied_set(d: &LevelDecomposition) -> IndexSetReport {
    satisfied_set_with(d, &SearchOptions::default())
}

pub fn satisfied_set_with(d: &LevelDecomposition, opts: &SearchOptions) -> IndexSetReport {
    let ks: Vec<i64> = d.occupied().collect();
    let results = exec::map_collect(opts.exec, &ks, |&k| search_index(d, k, opts));
    let mut satisfied = Vec::new();
    let mut witness_intervals = BTreeMap::new();
    let mut lattice_grid_disagreements = Vec::new();
    for r in results {
        if let Some(w) = r.lattice.or(r.grid) {
            satisfied.push(r.k);
            witness_intervals.insert(r.k, w);
        }
        if r.lattice.is_none() && r.grid.is_some() {
            lattice_grid_disagreements.push(r.k);
        }
    }
    let p_upper = d.m().max(d.highest()).max(0) + d.m().max(0) + 2;
    let mut report = IndexSetReport {
        satisfied,
        unsatisfied_pairs: Vec::new(),
        witness_intervals,
        lattice_grid_disagreements,
        p_upper,
    };
    report.unsatisfied_pairs = (0..=p_upper).filter(|&k| report.in_p(k)).collect();
    report
}

/// `∬_{s ∈ E_k, t ∉ N_k} ds dt / |s-t|²` and whether it reaches `10⁻⁴`.
pub fn pair_integral_lower_check(d: &LevelDecomposition, k: i64) -> (f64, bool) {
    let e = d.level(k);
    let c = d.neighbors(k).complement();
    let v = restricted_pair_integral(&e, &c);
    (v, v >= PAIR_INTEGRAL_FLOOR)
}

/// Serialized decomposition plus index report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub delta: f64,
    #[serde(rename = "M")]
    pub m: i64,
    pub m_exact: bool,
    #[serde(rename = "E")]
    pub levels: BTreeMap<String, Vec<[f64; 2]>>,
    pub satisfied: Vec<i64>,
    pub unsatisfied_pairs: Vec<i64>,
}

impl DecompositionReport {
    pub fn new(d: &LevelDecomposition, r: &IndexSetReport) -> Self {
        Self {
            delta: d.delta(),
            m: d.m(),
            m_exact: d.m_exact(),
            levels: d.sets.iter().map(|(k, s)| (k.to_string(), s.to_pairs())).collect(),
            satisfied: r.satisfied.clone(),
            unsatisfied_pairs: r.unsatisfied_pairs.clone(),
        }
    }
}
