//! Finite unions of disjoint closed intervals inside a bounded domain.
//!
//! Components are kept sorted and pairwise separated: touching or overlapping
//! pieces are merged, and single points are dropped since they carry no
//! measure. Every operation builds its output from input endpoints only.

use serde::{Deserialize, Serialize};

use crate::plfn::Interval;
use crate::sum::CompensatedSum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    domain: Interval,
    components: Vec<Interval>,
}

impl IntervalSet {
    /// Normalizes arbitrary pieces: clips to the domain, sorts, merges.
    pub fn new(domain: Interval, pieces: impl IntoIterator<Item = Interval>) -> Self {
        let mut v: Vec<Interval> = pieces
            .into_iter()
            .map(|i| Interval { lo: i.lo.max(domain.lo), hi: i.hi.min(domain.hi) })
            .filter(|i| i.lo < i.hi)
            .collect();
        v.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut out: Vec<Interval> = Vec::with_capacity(v.len());
        for i in v {
            match out.last_mut() {
                Some(last) if i.lo <= last.hi => last.hi = last.hi.max(i.hi),
                _ => out.push(i),
            }
        }
        Self { domain, components: out }
    }

    pub fn empty(domain: Interval) -> Self {
        Self { domain, components: Vec::new() }
    }

    pub fn full(domain: Interval) -> Self {
        Self::new(domain, [domain])
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn components(&self) -> &[Interval] {
        &self.components
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn measure(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for c in &self.components {
            acc.add(c.measure());
        }
        acc.value()
    }

    /// `measure(self ∩ [a, b])` without materializing the intersection.
    pub fn measure_in(&self, a: f64, b: f64) -> f64 {
        if !(a < b) {
            return 0.0;
        }
        let start = self.components.partition_point(|c| c.hi <= a);
        let mut acc = CompensatedSum::new();
        for c in &self.components[start..] {
            if c.lo >= b {
                break;
            }
            acc.add(c.hi.min(b) - c.lo.max(a));
        }
        acc.value()
    }

    pub fn contains_point(&self, x: f64) -> bool {
        let i = self.components.partition_point(|c| c.hi < x);
        i < self.components.len() && self.components[i].lo <= x
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let (a, b) = (&self.components, &other.components);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            let lo = a[i].lo.max(b[j].lo);
            let hi = a[i].hi.min(b[j].hi);
            if lo < hi {
                out.push(Interval { lo, hi });
            }
            if a[i].hi < b[j].hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::new(self.domain, out)
    }

    pub fn intersect_interval(&self, iv: Interval) -> IntervalSet {
        Self::new(
            self.domain,
            self.components.iter().map(|c| Interval { lo: c.lo.max(iv.lo), hi: c.hi.min(iv.hi) }),
        )
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        Self::new(self.domain, self.components.iter().chain(&other.components).copied())
    }

    pub fn complement(&self) -> IntervalSet {
        let mut out = Vec::with_capacity(self.components.len() + 1);
        let mut cursor = self.domain.lo;
        for c in &self.components {
            if cursor < c.lo {
                out.push(Interval { lo: cursor, hi: c.lo });
            }
            cursor = c.hi;
        }
        if cursor < self.domain.hi {
            out.push(Interval { lo: cursor, hi: self.domain.hi });
        }
        Self { domain: self.domain, components: out }
    }

    pub fn difference(&self, other: &IntervalSet) -> IntervalSet {
        self.intersect(&other.complement())
    }

    /// Translates components and domain by `dx`.
    pub fn translate(&self, dx: f64) -> IntervalSet {
        let mv = |i: &Interval| Interval { lo: i.lo + dx, hi: i.hi + dx };
        Self::new(mv(&self.domain), self.components.iter().map(mv))
    }

    /// Sorted `[lo, hi]` pairs, the serialized form used in reports.
    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.components.iter().map(|c| [c.lo, c.hi]).collect()
    }
}

/// Sorted, deduplicated component endpoints of `sets`, plus the domain ends.
pub fn critical_points(domain: Interval, sets: &[&IntervalSet]) -> Vec<f64> {
    let mut pts = vec![domain.lo, domain.hi];
    for s in sets {
        for c in s.components() {
            pts.push(c.lo);
            pts.push(c.hi);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}
