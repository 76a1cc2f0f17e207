//! Piecewise-linear functions and periodic phase extensions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval [{lo}, {hi}] is reversed");
        Self { lo, hi }
    }

    pub fn measure(&self) -> f64 {
        self.hi - self.lo
    }

    /// True when `other` lies inside `self`.
    pub fn contains(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// True when the open interiors do not meet.
    pub fn is_disjoint(&self, other: &Interval) -> bool {
        other.hi <= self.lo || other.lo >= self.hi
    }
}

impl From<[f64; 2]> for Interval {
    fn from(p: [f64; 2]) -> Self {
        Self { lo: p[0], hi: p[1] }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

/// One linear piece of a [`PLFunction`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Segment {
    pub fn is_flat(&self) -> bool {
        self.y0 == self.y1
    }

    pub fn y_min(&self) -> f64 {
        self.y0.min(self.y1)
    }

    pub fn y_max(&self) -> f64 {
        self.y0.max(self.y1)
    }

    /// Value at `x`, assuming `x0 <= x <= x1`. Exact at both endpoints.
    pub fn value(&self, x: f64) -> f64 {
        if x <= self.x0 {
            return self.y0;
        }
        if x >= self.x1 {
            return self.y1;
        }
        let w = (x - self.x0) / (self.x1 - self.x0);
        self.y0 + w * (self.y1 - self.y0)
    }

    /// Position where a sloped segment attains `level`, clamped to the segment.
    pub fn crossing(&self, level: f64) -> f64 {
        debug_assert!(!self.is_flat());
        if level == self.y0 {
            return self.x0;
        }
        if level == self.y1 {
            return self.x1;
        }
        let w = (level - self.y0) / (self.y1 - self.y0);
        (self.x0 + w * (self.x1 - self.x0)).clamp(self.x0, self.x1)
    }

    pub fn slope(&self) -> f64 {
        (self.y1 - self.y0) / (self.x1 - self.x0)
    }
}

/// Continuous piecewise-linear function on a closed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PLFunction {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PLFunction {
    pub fn new(points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        Self::from_xy(xs, ys)
    }

    pub fn from_xy(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidFunction("x and y lengths differ".into()));
        }
        if xs.len() < 2 {
            return Err(Error::InvalidFunction("need at least 2 breakpoints".into()));
        }
        if let Some(v) = xs.iter().chain(&ys).find(|v| !v.is_finite()) {
            return Err(Error::InvalidFunction(format!("non-finite value {v}")));
        }
        if let Some(w) = xs.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidFunction(format!(
                "breakpoints not strictly increasing at {} >= {}",
                w[0], w[1]
            )));
        }
        Ok(Self { xs, ys })
    }

    /// Affine function through `(lo, y_lo)` and `(hi, y_hi)`.
    pub fn linear(lo: f64, hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        Self::from_xy(vec![lo, hi], vec![y_lo, y_hi])
    }

    pub fn constant(lo: f64, hi: f64, c: f64) -> Result<Self> {
        Self::linear(lo, hi, c, c)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn domain(&self) -> Interval {
        Interval::new(self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn first_value(&self) -> f64 {
        self.ys[0]
    }

    pub fn last_value(&self) -> f64 {
        self.ys[self.ys.len() - 1]
    }

    pub fn segment(&self, i: usize) -> Segment {
        Segment { x0: self.xs[i], x1: self.xs[i + 1], y0: self.ys[i], y1: self.ys[i + 1] }
    }

    pub fn segment_count(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        (0..self.segment_count()).map(|i| self.segment(i))
    }

    pub fn min_value(&self) -> f64 {
        self.ys.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Exact linear interpolation; errors outside the domain.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        let d = self.domain();
        if !(d.lo <= x && x <= d.hi) {
            return Err(Error::OutOfDomain { x, lo: d.lo, hi: d.hi });
        }
        Ok(self.value_at(x))
    }

    /// Interpolated value, clamping `x` into the domain.
    pub fn value_at(&self, x: f64) -> f64 {
        let i = self.xs.partition_point(|&xi| xi <= x);
        if i == 0 {
            return self.ys[0];
        }
        if i == self.xs.len() {
            return self.last_value();
        }
        self.segment(i - 1).value(x)
    }

    /// `f - f(x_first)`, so the output starts at 0.
    pub fn normalize(&self) -> Self {
        self.shift(-self.ys[0])
    }

    pub fn shift(&self, c: f64) -> Self {
        let ys = if c == -self.ys[0] {
            // Subtracting the first value must give exactly zero there.
            std::iter::once(0.0).chain(self.ys[1..].iter().map(|y| y + c)).collect()
        } else {
            self.ys.iter().map(|y| y + c).collect()
        };
        Self { xs: self.xs.clone(), ys }
    }

    pub fn scale_values(&self, a: f64) -> Self {
        Self { xs: self.xs.clone(), ys: self.ys.iter().map(|y| a * y).collect() }
    }

    /// `x ↦ f(lo + hi - x)` on the same domain.
    pub fn reflect(&self) -> Self {
        let d = self.domain();
        let n = self.xs.len();
        let mut xs: Vec<f64> = (0..n).map(|i| d.lo + d.hi - self.xs[n - 1 - i]).collect();
        xs[0] = d.lo;
        xs[n - 1] = d.hi;
        let ys = self.ys.iter().rev().copied().collect();
        Self { xs, ys }
    }

    /// Shifts every segment lying flat on a multiple of `delta` up by `epsilon`,
    /// so that every level set `{f = k delta}` is finite.
    pub fn jitter_levels(&self, delta: f64, epsilon: f64) -> Result<Self> {
        if !(delta > 0.0 && epsilon > 0.0 && epsilon < delta) {
            return Err(Error::InvalidParameter(format!(
                "jitter needs 0 < epsilon < delta, got epsilon={epsilon}, delta={delta}"
            )));
        }
        let mut ys = self.ys.clone();
        let mut moved = vec![false; ys.len()];
        for (i, s) in self.segments().enumerate() {
            if s.is_flat() && is_level(s.y0, delta) {
                moved[i] = true;
                moved[i + 1] = true;
            }
        }
        for (y, m) in ys.iter_mut().zip(&moved) {
            if *m {
                *y += epsilon;
            }
        }
        Ok(Self { xs: self.xs.clone(), ys })
    }

    /// Flat segments sitting exactly on a multiple of `delta`.
    pub fn flat_level_segments(&self, delta: f64) -> Vec<Segment> {
        self.segments().filter(|s| s.is_flat() && is_level(s.y0, delta)).collect()
    }

    /// Restriction to `[lo, hi]` (inside the domain), with new end breakpoints.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Self> {
        let d = self.domain();
        if !(d.lo <= lo && lo < hi && hi <= d.hi) {
            return Err(Error::InvalidParameter(format!(
                "cannot restrict [{}, {}] to [{lo}, {hi}]",
                d.lo, d.hi
            )));
        }
        let mut pts = vec![(lo, self.value_at(lo))];
        pts.extend(self.breakpoints().filter(|&(x, _)| lo < x && x < hi));
        pts.push((hi, self.value_at(hi)));
        Self::new(pts)
    }
}

/// True when `y` equals `k * delta` for some integer `k`, as computed in the
/// level-set code.
pub(crate) fn is_level(y: f64, delta: f64) -> bool {
    let k = (y / delta).round();
    k * delta == y
}

/// Lift of a circle map: a base function on `[0, 1]` extended by
/// `f(x + 1) = f(x) + increment`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFunction {
    base: PLFunction,
    increment: f64,
}

impl PhaseFunction {
    pub fn new(base: PLFunction) -> Result<Self> {
        let d = base.domain();
        if d.lo != 0.0 || d.hi != 1.0 {
            return Err(Error::InvalidFunction(format!(
                "phase base must live on [0, 1], got [{}, {}]",
                d.lo, d.hi
            )));
        }
        let increment = base.last_value() - base.first_value();
        Ok(Self { base, increment })
    }

    pub fn base(&self) -> &PLFunction {
        &self.base
    }

    pub fn increment(&self) -> f64 {
        self.increment
    }

    /// Topological degree of the underlying circle map.
    pub fn degree(&self) -> f64 {
        self.increment
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        if (0.0..=1.0).contains(&x) {
            return self.base.value_at(x);
        }
        let n = x.floor();
        self.base.value_at(x - n) + n * self.increment
    }

    /// The extension restricted to `[0, periods]` as a plain PL function.
    /// Breakpoints whose shifted abscissae round onto an earlier one are
    /// dropped, so the copies stay continuous but lose detail finer than the
    /// spacing of doubles near each integer.
    pub fn extend(&self, periods: usize) -> PLFunction {
        let periods = periods.max(1);
        let mut xs = self.base.xs.clone();
        let mut ys = self.base.ys.clone();
        for j in 1..periods {
            let dx = j as f64;
            let dy = j as f64 * self.increment;
            for (&x, &y) in self.base.xs.iter().zip(&self.base.ys).skip(1) {
                let x = x + dx;
                if x > xs[xs.len() - 1] {
                    xs.push(x);
                    ys.push(y + dy);
                }
            }
            // the copy must end exactly on the shifted endpoint value
            let last = ys.len() - 1;
            ys[last] = self.base.ys[self.base.ys.len() - 1] + dy;
        }
        PLFunction { xs, ys }
    }

    pub fn shift(&self, c: f64) -> Self {
        Self { base: self.base.shift(c), increment: self.increment }
    }
}

/// Degree of a phase function: the endpoint increment.
pub fn degree(f: &PhaseFunction) -> f64 {
    f.degree()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity() -> PLFunction {
        PLFunction::linear(0.0, 1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn evaluates_by_interpolation() {
        let f = PLFunction::linear(0.0, 1.0, 0.0, 3.0).unwrap();
        assert_eq!(f.evaluate(0.5).unwrap(), 1.5);
        assert!(matches!(f.evaluate(1.5), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn phase_extension() {
        let p = PhaseFunction::new(identity()).unwrap();
        assert_eq!(p.evaluate(1.5), 1.5);
        assert_eq!(p.evaluate(-0.25), -0.25);
        assert_eq!(p.evaluate(2.0), 2.0);
    }

    #[test]
    fn degree_is_endpoint_difference() {
        let p = PhaseFunction::new(PLFunction::linear(0.0, 1.0, 0.0, 3.0).unwrap()).unwrap();
        assert_eq!(degree(&p), 3.0);
        let c = PhaseFunction::new(PLFunction::constant(0.0, 1.0, 2.0).unwrap()).unwrap();
        assert_eq!(degree(&c), 0.0);
        // s + a bump that returns to the line before s = 1
        let bumpy = PLFunction::new([(0.0, 0.0), (0.3, 0.4), (0.5, 0.45), (0.7, 0.7), (1.0, 1.0)])
            .unwrap();
        assert_eq!(degree(&PhaseFunction::new(bumpy).unwrap()), 1.0);
    }

    #[test]
    fn normalize_subtracts_first_value() {
        let f = PLFunction::linear(0.0, 1.0, 5.0, 6.0).unwrap().normalize();
        assert_eq!(f.ys(), &[0.0, 1.0]);
        let c = PLFunction::constant(0.0, 1.0, 2.0).unwrap().normalize();
        assert_eq!(c.ys(), &[0.0, 0.0]);
        let g = PLFunction::new([(0.0, 1.0), (0.5, 3.0), (1.0, 2.0)]).unwrap().normalize();
        assert_eq!(g.ys(), &[0.0, 2.0, 1.0]);
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert!(PLFunction::new([(0.0, 0.0)]).is_err());
        assert!(PLFunction::new([(0.0, 0.0), (0.0, 1.0)]).is_err());
        assert!(PLFunction::new([(0.0, 0.0), (1.0, f64::NAN)]).is_err());
    }

    #[test]
    fn jitter_constant_at_level() {
        let delta = 0.1;
        let f = PLFunction::constant(0.0, 1.0, 2.0 * delta).unwrap();
        let eps = delta / 1000.0;
        let j = f.jitter_levels(delta, eps).unwrap();
        assert_eq!(j.ys(), &[2.0 * delta + eps, 2.0 * delta + eps]);
        assert!(j.flat_level_segments(delta).is_empty());
    }

    #[test]
    fn jitter_is_noop_without_flat_levels() {
        let f = PLFunction::new([(0.0, 0.0), (0.5, 0.33), (1.0, 0.05)]).unwrap();
        assert_eq!(f.jitter_levels(0.1, 1e-6).unwrap(), f);
    }

    #[test]
    fn jitter_embedded_flat_piece() {
        let delta = 0.25;
        let f = PLFunction::new([(0.0, 0.0), (0.3, 0.5), (0.6, 0.5), (1.0, 1.0)]).unwrap();
        let eps = 1e-4;
        let j = f.jitter_levels(delta, eps).unwrap();
        assert!(j.flat_level_segments(delta).is_empty());
        // count crossings of y = 0.5 segment by segment
        let crossings: usize = j
            .segments()
            .filter(|s| !s.is_flat() && s.y_min() <= 0.5 && 0.5 <= s.y_max())
            .count();
        assert_eq!(crossings, 1);
        for (a, b) in f.ys().iter().zip(j.ys()) {
            assert!((a - b).abs() <= eps);
        }
    }

    #[test]
    fn reflect_and_restrict() {
        let f = PLFunction::new([(0.0, 0.0), (0.25, 1.0), (1.0, 2.0)]).unwrap();
        let r = f.reflect();
        assert_eq!(r.xs(), &[0.0, 0.75, 1.0]);
        assert_eq!(r.value_at(0.75), 1.0);
        let s = f.restrict(0.1, 0.5).unwrap();
        assert_eq!(s.xs(), &[0.1, 0.25, 0.5]);
    }

    #[test]
    fn extend_two_periods() {
        let base = PLFunction::new([(0.0, 0.0), (0.5, 2.0), (1.0, 1.0)]).unwrap();
        let p = PhaseFunction::new(base).unwrap();
        let e = p.extend(2);
        assert_eq!(e.xs(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(e.ys(), &[0.0, 2.0, 1.0, 3.0, 2.0]);
    }

    fn arb_pl() -> impl Strategy<Value = PLFunction> {
        prop::collection::vec((0.01f64..1.0, -5.0f64..5.0), 1..12).prop_map(|steps| {
            let mut x = 0.0;
            let mut pts = vec![(0.0, 0.0)];
            for (dx, y) in steps {
                x += dx;
                pts.push((x, y));
            }
            let total = x;
            PLFunction::new(pts.into_iter().map(|(x, y)| (x / total, y))).unwrap()
        })
    }

    proptest! {
        #[test]
        fn exact_at_breakpoints(f in arb_pl()) {
            for (x, y) in f.breakpoints() {
                prop_assert_eq!(f.evaluate(x).unwrap(), y);
            }
        }

        #[test]
        fn period_increment(f in arb_pl(), x in -3.0f64..3.0) {
            let p = PhaseFunction::new(f).unwrap();
            let d = p.evaluate(x + 1.0) - p.evaluate(x);
            prop_assert!((d - p.increment()).abs() <= 1e-12 * (1.0 + p.evaluate(x).abs() + p.increment().abs()));
        }

        #[test]
        fn degree_shift_invariant(f in arb_pl(), c in -10.0f64..10.0) {
            let p = PhaseFunction::new(f).unwrap();
            let q = p.shift(c);
            prop_assert!((degree(&p) - degree(&q)).abs() <= 1e-12 * (1.0 + c.abs()));
        }

        #[test]
        fn jitter_within_epsilon(f in arb_pl(), level in -3i32..3) {
            // force a flat piece at a level
            let delta = 0.5;
            let mut ys = f.ys().to_vec();
            if ys.len() >= 3 {
                ys[1] = level as f64 * delta;
                ys[2] = level as f64 * delta;
            }
            let g = PLFunction::from_xy(f.xs().to_vec(), ys).unwrap();
            let eps = 1e-6;
            let j = g.jitter_levels(delta, eps).unwrap();
            prop_assert!(j.flat_level_segments(delta).is_empty());
            for (a, b) in g.ys().iter().zip(j.ys()) {
                prop_assert!((a - b).abs() <= eps * (1.0 + 1e-9) + f64::EPSILON * a.abs());
            }
        }
    }
}
