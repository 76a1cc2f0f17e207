//! The nonlocal threshold integral `∬_{|f(s)-f(t)|>δ} ds dt / |s-t|²` over a
//! square, computed in closed form for piecewise-linear `f`, with adaptive
//! quadrature and Monte Carlo engines as independent cross-checks.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::intervals::IntervalSet;
use crate::plfn::{Interval, PLFunction, PhaseFunction, Segment};
use crate::sum::{sorted_sum, CompensatedSum};

/// Side of the integration square for phase functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Square {
    /// `[0, 1]²`, no periodicity used.
    Unit,
    /// `[0, 2]²` over two periods of the phase.
    Double,
}

impl Square {
    pub fn from_side(side: u32) -> Result<Self> {
        match side {
            1 => Ok(Square::Unit),
            2 => Ok(Square::Double),
            _ => Err(Error::InvalidParameter(format!("square side must be 1 or 2, got {side}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IntegralRequest {
    f: PLFunction,
    delta: f64,
    /// Base function when `f` is a two-period extension; the exact engine
    /// then works from the base so abscissae near 0 keep full precision.
    periodic: Option<PhaseFunction>,
}

impl IntegralRequest {
    /// Integrate over `domain(f)²`.
    pub fn new(f: &PLFunction, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        Ok(Self { f: f.clone(), delta, periodic: None })
    }

    pub fn phase(phi: &PhaseFunction, delta: f64, square: Square) -> Result<Self> {
        match square {
            Square::Unit => Self::new(phi.base(), delta),
            Square::Double => {
                let mut req = Self::new(&phi.extend(2), delta)?;
                req.periodic = Some(phi.clone());
                Ok(req)
            }
        }
    }

    pub fn function(&self) -> &PLFunction {
        &self.f
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Quadrature,
    Montecarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult {
    pub value: f64,
    pub method: Method,
    pub error_estimate: f64,
    pub pieces: usize,
    /// False when the quadrature budget ran out before reaching `tol`.
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub converged: bool,
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

/// True when `|f_A(s) - f_B(t)| <= δ` on the whole cell.
fn cell_is_null(a: &Segment, b: &Segment, delta: f64) -> bool {
    a.y_max() - b.y_min() <= delta && b.y_max() - a.y_min() <= delta
}

/// Index pairs `(i, j)`, `i <= j`, in row-major order.
fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
}

// ---------------------------------------------------------------- exact ---

/// End of an admissible `t`-piece as a function of `s`.
#[derive(Debug, Clone, Copy)]
enum End {
    Fixed(f64),
    /// `t` where `f_B(t) = f_A(s) + sign·δ`
    Level(f64),
}

/// Unclamped position where sloped `seg` reaches `level`.
fn reach(seg: &Segment, level: f64) -> f64 {
    seg.x0 + (level - seg.y0) / (seg.y1 - seg.y0) * (seg.x1 - seg.x0)
}

/// `∫_{s0}^{s1} ds / d(s)` for `d` affine with `d(s0) = d0`, `d(s1) = d1`
/// of one sign.
fn reciprocal_linear(s0: f64, s1: f64, d0: f64, d1: f64) -> f64 {
    let q = d1 / d0;
    if (q - 1.0).abs() < 0.5 {
        let x = (d1 - d0) / d0;
        let r = if x == 0.0 { 1.0 } else { x.ln_1p() / x };
        (s1 - s0) / d0 * r
    } else {
        // d1 - d0 would swamp a tiny endpoint; the ratio keeps it
        (s1 - s0) * q.ln() / (d1 - d0)
    }
}

/// Admissible pieces of `B` for a given `f_A(s)` value, as symbolic ends.
fn admissible_pieces(b: &Segment, fa: f64, delta: f64) -> ([Option<(End, End)>; 2], usize) {
    let mut out = [None, None];
    let mut n = 0;
    if b.is_flat() {
        if (fa - b.y0).abs() > delta {
            out[0] = Some((End::Fixed(b.x0), End::Fixed(b.x1)));
            n = 1;
        }
        return (out, n);
    }
    let t_minus = reach(b, fa - delta);
    let t_plus = reach(b, fa + delta);
    let ((tl, sl), (th, sh)) = if t_minus <= t_plus {
        ((t_minus, -1.0), (t_plus, 1.0))
    } else {
        ((t_plus, 1.0), (t_minus, -1.0))
    };
    if tl > b.x0 {
        let hi = if tl < b.x1 { End::Level(sl) } else { End::Fixed(b.x1) };
        out[n] = Some((End::Fixed(b.x0), hi));
        n += 1;
    }
    if th < b.x1 {
        let lo = if th > b.x0 { End::Level(sh) } else { End::Fixed(b.x0) };
        out[n] = Some((lo, End::Fixed(b.x1)));
        n += 1;
    }
    (out, n)
}

/// `∫_{s ∈ A} ∫_{t ∈ B, |f(s)-f(t)|>δ} dt ds / (s-t)²` in closed form.
///
/// The `s`-range is split where a strip edge `f_B(t) = f_A(s) ± δ` enters or
/// leaves `B`; on each piece the admissible `t`-set is `B` minus one interval
/// with ends affine in `s`, the inner integral is `1/(s-hi) - 1/(s-lo)`, and
/// each outer term integrates to a logarithm.
pub fn cell_integral(a: &Segment, b: &Segment, delta: f64) -> f64 {
    if cell_is_null(a, b, delta) {
        return 0.0;
    }
    // the kernel only sees s - t; translating to the junction of the two
    // segments is exact for nearby breakpoints and resolves pieces only a
    // few ulps wide
    let o = if a.x1 <= b.x0 {
        a.x1
    } else if b.x1 <= a.x0 {
        b.x1
    } else {
        a.x0
    };
    let a = &Segment { x0: a.x0 - o, x1: a.x1 - o, ..*a };
    let b = &Segment { x0: b.x0 - o, x1: b.x1 - o, ..*b };
    let mut cuts = vec![a.x0, a.x1];
    if !a.is_flat() {
        for v in [b.y0 - delta, b.y0 + delta, b.y1 - delta, b.y1 + delta] {
            if a.y_min() < v && v < a.y_max() {
                cuts.push(a.crossing(v));
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let end_at = |e: End, s: f64| match e {
        End::Fixed(x) => x,
        End::Level(sign) => reach(b, a.value(s) + sign * delta),
    };
    let mut acc = CompensatedSum::new();
    for w in cuts.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        if !(s1 > s0) {
            continue;
        }
        let mid = 0.5 * (s0 + s1);
        let (pieces, n) = admissible_pieces(b, a.value(mid), delta);
        for &(lo, hi) in pieces[..n].iter().flatten() {
            let term = |e: End| reciprocal_linear(s0, s1, s0 - end_at(e, s0), s1 - end_at(e, s1));
            acc.add(term(hi));
            acc.add(-term(lo));
        }
    }
    acc.value()
}

pub fn integral_exact(req: &IntegralRequest) -> IntegralResult {
    integral_exact_with(req, Exec::Parallel)
}

pub fn integral_exact_with(req: &IntegralRequest, exec: Exec) -> IntegralResult {
    let (mut values, pieces) = match &req.periodic {
        None => exact_terms(&req.f, req.delta, exec),
        Some(phi) => {
            // [0,2]² = two copies of [0,1]² plus twice [0,1]×[1,2]
            let (mut v, p) = exact_terms(phi.base(), req.delta, exec);
            let (c, q) = cross_terms(phi, req.delta, exec);
            v.extend(c);
            v.iter_mut().for_each(|x| *x *= 2.0);
            (v, 2 * p + 2 * q)
        }
    };
    // clamp rounding below zero without hiding a NaN
    let value = sorted_sum(&mut values);
    IntegralResult {
        value: if value < 0.0 { 0.0 } else { value },
        method: Method::Exact,
        error_estimate: 0.0,
        pieces,
        converged: true,
    }
}

/// Cell values of `∬_{domain²}`, off-diagonal cells doubled.
fn exact_terms(f: &PLFunction, delta: f64, exec: Exec) -> (Vec<f64>, usize) {
    let n = f.segment_count();
    let rows = exec::map_range(exec, n, |i| {
        let a = f.segment(i);
        let mut row = Vec::with_capacity(n - i);
        let mut pieces = 0usize;
        for j in i..n {
            let b = f.segment(j);
            if cell_is_null(&a, &b, delta) {
                continue;
            }
            pieces += 1;
            let v = cell_integral(&a, &b, delta);
            row.push(if i == j { v } else { 2.0 * v });
        }
        (row, pieces)
    });
    let pieces = rows.iter().map(|r| r.1).sum();
    (rows.into_iter().flat_map(|r| r.0).collect(), pieces)
}

/// Cell values of `∬_{s ∈ [0,1], t ∈ [1,2]}` in coordinates centred at 1:
/// `s - 1 ∈ [-1, 0]` and `t - 1 ∈ [0, 1]`, so abscissae near either side of
/// 1 stay exact. Pieces of `s` that collapse to a point are measure zero.
fn cross_terms(phi: &PhaseFunction, delta: f64, exec: Exec) -> (Vec<f64>, usize) {
    let base = phi.base();
    let left: Vec<Segment> = base
        .segments()
        .map(|a| Segment { x0: a.x0 - 1.0, x1: a.x1 - 1.0, ..a })
        .filter(|a| a.x0 < a.x1)
        .collect();
    let inc = phi.increment();
    let right: Vec<Segment> = base.segments().map(|b| Segment { y0: b.y0 + inc, y1: b.y1 + inc, ..b }).collect();
    let rows = exec::map_collect(exec, &left, |a| {
        let mut row = Vec::new();
        let mut pieces = 0usize;
        for b in &right {
            if cell_is_null(a, b, delta) {
                continue;
            }
            pieces += 1;
            row.push(cell_integral(a, b, delta));
        }
        (row, pieces)
    });
    let pieces = rows.iter().map(|r| r.1).sum();
    (rows.into_iter().flat_map(|r| r.0).collect(), pieces)
}

// ----------------------------------------------------------- quadrature ---

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate and `|K15 - G7|`.
fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

#[derive(Debug, PartialEq)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod quadrature. Returns
/// `(value, error, converged, panels)`.
pub fn adaptive_gk<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    tol: f64,
    max_panels: usize,
) -> (f64, f64, bool, usize) {
    adaptive_gk_split(f, &[lo, hi], tol, max_panels)
}

/// [`adaptive_gk`] starting from the panels between sorted `cuts`, so known
/// kinks sit on panel ends.
pub fn adaptive_gk_split<F: Fn(f64) -> f64>(f: &F, cuts: &[f64], tol: f64, max_panels: usize) -> (f64, f64, bool, usize) {
    let mut heap = BinaryHeap::new();
    let mut total_err = 0.0;
    for w in cuts.windows(2).filter(|w| w[1] > w[0]) {
        let (v, e) = gk15(f, w[0], w[1]);
        heap.push(Panel { lo: w[0], hi: w[1], value: v, error: e });
        total_err += e;
    }
    let mut count = heap.len();
    while total_err > tol && count < max_panels {
        let Some(p) = heap.pop() else { break };
        let mid = 0.5 * (p.lo + p.hi);
        if !(p.lo < mid && mid < p.hi) {
            // cannot split further; keep it and stop refining
            heap.push(p);
            break;
        }
        let (v1, e1) = gk15(f, p.lo, mid);
        let (v2, e2) = gk15(f, mid, p.hi);
        total_err += e1 + e2 - p.error;
        heap.push(Panel { lo: p.lo, hi: mid, value: v1, error: e1 });
        heap.push(Panel { lo: mid, hi: p.hi, value: v2, error: e2 });
        count += 1;
    }
    let mut values: Vec<f64> = heap.iter().map(|p| p.value).collect();
    let mut errs: Vec<f64> = heap.iter().map(|p| p.error).collect();
    let err = sorted_sum(&mut errs);
    (sorted_sum(&mut values), err, err <= tol, count)
}

/// Root of monotone `h` on `[lo, hi]` with `h(lo)`, `h(hi)` of opposite sign.
fn bisect<H: Fn(f64) -> f64>(h: H, mut lo: f64, mut hi: f64) -> f64 {
    let h_lo = h(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if !(lo < mid && mid < hi) {
            break;
        }
        if (h(mid) > 0.0) == (h_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Inner integral over `t ∈ B` for fixed `s`, locating the strip by bisection
/// on point evaluations of `f_B`.
fn inner_numeric(f: &PLFunction, b: &Segment, s: f64, delta: f64) -> f64 {
    let fs = f.value_at(s);
    let fb = |t: f64| f.value_at(t.clamp(b.x0, b.x1));
    let kernel = |c: f64, d: f64| 1.0 / (s - d) - 1.0 / (s - c);
    // split B at the points where |f_B - f(s)| crosses δ
    let mut cuts = vec![b.x0, b.x1];
    for level in [fs - delta, fs + delta] {
        let h = |t: f64| fb(t) - level;
        let (h0, h1) = (h(b.x0), h(b.x1));
        if (h0 < 0.0) != (h1 < 0.0) && h0 != 0.0 && h1 != 0.0 {
            cuts.push(bisect(h, b.x0, b.x1));
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        if w[1] > w[0] && (fb(0.5 * (w[0] + w[1])) - fs).abs() > delta {
            acc += kernel(w[0], w[1]);
        }
    }
    acc
}

/// Points of `A` where the strip `|f_A(s) - t| ≤ δ` meets an end value of
/// `B`; the inner integral is smooth between them.
fn outer_kinks(a: &Segment, b: &Segment, delta: f64) -> Vec<f64> {
    let mut cuts = vec![a.x0, a.x1];
    if !a.is_flat() {
        for target in [b.y0 - delta, b.y0 + delta, b.y1 - delta, b.y1 + delta] {
            let s = a.crossing(target);
            if s > a.x0 && s < a.x1 {
                cuts.push(s);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts
}

/// Adaptive quadrature over segment-pair cells with claimed absolute error
/// `tol`. Sets `converged = false` when the panel budget runs out.
pub fn integral_quadrature(req: &IntegralRequest, tol: f64) -> Result<IntegralResult> {
    integral_quadrature_with(req, tol, Exec::Parallel)
}

pub fn integral_quadrature_with(req: &IntegralRequest, tol: f64, exec: Exec) -> Result<IntegralResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let f = &req.f;
    let delta = req.delta;
    let cells: Vec<(usize, usize)> = upper_pairs(f.segment_count())
        .into_iter()
        .filter(|&(i, j)| !cell_is_null(&f.segment(i), &f.segment(j), delta))
        .collect();
    if cells.is_empty() {
        return Ok(IntegralResult {
            value: 0.0,
            method: Method::Quadrature,
            error_estimate: 0.0,
            pieces: 0,
            converged: true,
        });
    }
    let cell_tol = tol / (2.0 * cells.len() as f64);
    let results = exec::map_collect(exec, &cells, |&(i, j)| {
        let a = f.segment(i);
        let b = f.segment(j);
        let outer = |s: f64| inner_numeric(f, &b, s, delta);
        let (v, e, ok, _) = adaptive_gk_split(&outer, &outer_kinks(&a, &b, delta), cell_tol, 20_000);
        let w = if i == j { 1.0 } else { 2.0 };
        (w * v, w * e, ok)
    });
    let converged = results.iter().all(|r| r.2);
    let mut values: Vec<f64> = results.iter().map(|r| r.0).collect();
    let mut errors: Vec<f64> = results.iter().map(|r| r.1).collect();
    Ok(IntegralResult {
        value: sorted_sum(&mut values),
        method: Method::Quadrature,
        error_estimate: sorted_sum(&mut errors),
        pieces: cells.len(),
        converged,
    })
}

// ---------------------------------------------------------- Monte Carlo ---

const MC_CHUNK: u64 = 1 << 16;

/// Uniform sampling of the square. Deterministic for a fixed seed and
/// independent of thread count: chunk `c` draws from stream `c` of a ChaCha8
/// generator seeded with `seed`.
pub fn integral_montecarlo(req: &IntegralRequest, samples: u64, seed: u64) -> Result<IntegralResult> {
    integral_montecarlo_with(req, samples, seed, Exec::Parallel)
}

pub fn integral_montecarlo_with(
    req: &IntegralRequest,
    samples: u64,
    seed: u64,
    exec: Exec,
) -> Result<IntegralResult> {
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let f = &req.f;
    let dom = f.domain();
    let side = dom.measure();
    let chunks = samples.div_ceil(MC_CHUNK) as usize;
    let sums = exec::map_range(exec, chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let n = MC_CHUNK.min(samples - c as u64 * MC_CHUNK);
        let mut s1 = CompensatedSum::new();
        let mut s2 = CompensatedSum::new();
        for _ in 0..n {
            let s = dom.lo + side * rng.random::<f64>();
            let t = dom.lo + side * rng.random::<f64>();
            if (f.value_at(s) - f.value_at(t)).abs() > req.delta {
                let w = 1.0 / ((s - t) * (s - t));
                s1.add(w);
                s2.add(w * w);
            }
        }
        (s1.value(), s2.value())
    });
    let mut s1 = CompensatedSum::new();
    let mut s2 = CompensatedSum::new();
    for (a, b) in sums {
        s1.add(a);
        s2.add(b);
    }
    let n = samples as f64;
    let mean = s1.value() / n;
    let var = if samples > 1 { ((s2.value() / n - mean * mean) * n / (n - 1.0)).max(0.0) } else { 0.0 };
    let area = side * side;
    Ok(IntegralResult {
        value: area * mean,
        method: Method::Montecarlo,
        error_estimate: area * (var / n).sqrt(),
        pieces: chunks,
        converged: true,
    })
}

// ------------------------------------------------- separated pair sets ---

/// `∬_{s∈A, t∈B} ds dt / (s-t)²` exactly; `+∞` when components overlap or
/// touch.
pub fn restricted_pair_integral(a: &IntervalSet, b: &IntervalSet) -> f64 {
    let mut terms = Vec::new();
    for x in a.components() {
        for y in b.components() {
            let (l, r) = if x.hi <= y.lo {
                (x, y)
            } else if y.hi <= x.lo {
                (y, x)
            } else {
                return f64::INFINITY;
            };
            let gap = r.lo - l.hi;
            if gap <= 0.0 {
                return f64::INFINITY;
            }
            let (u, v) = (l.measure(), r.measure());
            // ln[(gap+u)(gap+v) / (gap (gap+u+v))], as two ratios so that
            // tiny lengths do not underflow
            terms.push(((u / gap) * (v / (gap + u + v))).ln_1p());
        }
    }
    sorted_sum(&mut terms)
}

/// `B` with an `eps`-neighbourhood of `A` removed, so that the pair integral
/// against `A` is finite.
pub fn separate(b: &IntervalSet, a: &IntervalSet, eps: f64) -> IntervalSet {
    let grown = IntervalSet::new(
        a.domain(),
        a.components().iter().map(|c| Interval { lo: c.lo - eps, hi: c.hi + eps }),
    );
    b.difference(&grown)
}
