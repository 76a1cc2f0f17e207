//! Deterministic families of normalized test functions on `[0, 1]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plfn::PLFunction;
use crate::structure::Side;

/// Fewest segments accepted by [`gen_log_boundary`].
pub const MIN_LOG_SEGMENTS: usize = 64;
/// Breakpoints per level band in the logarithmic profiles.
pub const POINTS_PER_BAND: f64 = 4.0;

/// `g(s) = Mδ s`.
pub fn gen_linear(m: i64, delta: f64) -> Result<PLFunction> {
    if m < 1 || !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("linear needs M >= 1 and delta > 0, got M={m}, delta={delta}")));
    }
    PLFunction::linear(0.0, 1.0, 0.0, m as f64 * delta)
}

/// `ln(1 + e^{-beta_log})`, the value of `ln(1 + s/β)` at `s = 1`.
fn log_span(beta_log: f64) -> f64 {
    -beta_log + beta_log.exp().ln_1p()
}

/// `g(1)`, snapped to the nearest multiple of δ when within rounding of it.
fn log_top(k: f64, beta_log: f64, delta: f64) -> f64 {
    let top = delta / k * log_span(beta_log);
    let m = (top / delta).round();
    if ((top / delta) - m).abs() <= 1e-12 * m.max(1.0) {
        m * delta
    } else {
        top
    }
}

/// Appends `(x, y)`, merging points whose abscissae collide in floating
/// point by keeping the larger value.
fn push_merged(pts: &mut Vec<(f64, f64)>, x: f64, y: f64) {
    match pts.last_mut() {
        Some(last) if x <= last.0 => last.1 = last.1.max(y),
        _ => pts.push((x, y)),
    }
}

/// Breakpoints of the left profile `(δ/K) ln(1 + s/β)` on `[0, 1]`.
///
/// With `u = ln(1 + s/β)` the profile is linear in `u`, and
/// `s = exp(ln β + u + ln(1 - e^{-u}))` never materializes β.
fn left_profile(k: f64, beta_log: f64, delta: f64, segments: usize) -> Vec<(f64, f64)> {
    let span = log_span(beta_log);
    let step = (k / POINTS_PER_BAND).min(span / segments as f64);
    let n = (span / step).ceil() as usize;
    let top = log_top(k, beta_log, delta);
    let mut pts = vec![(0.0, 0.0)];
    for j in 1..n {
        let u = j as f64 * step;
        let s = (beta_log + u + (-(-u).exp_m1()).ln()).exp().max(f64::MIN_POSITIVE);
        if s >= 1.0 {
            break;
        }
        push_merged(&mut pts, s, top * (u / span));
    }
    push_merged(&mut pts, 1.0, top);
    pts
}

/// `s ↦ g(1) - g(1 - s)`: the same profile with its steep end at 1.
fn reflect_profile(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let top = pts[pts.len() - 1].1;
    let mut out = Vec::with_capacity(pts.len());
    for &(x, y) in pts.iter().rev() {
        push_merged(&mut out, 1.0 - x, top - y);
    }
    out
}

fn log_profile(k: f64, beta_log: f64, delta: f64, side: Side, segments: usize) -> Result<Vec<(f64, f64)>> {
    if !(k > 0.0 && k.is_finite()) || !(beta_log < 0.0 && beta_log.is_finite()) {
        return Err(Error::InvalidParameter(format!("log profile needs K > 0 and beta_log < 0, got K={k}, beta_log={beta_log}")));
    }
    if !(delta > 0.0 && delta.is_finite()) || segments < MIN_LOG_SEGMENTS {
        return Err(Error::InvalidParameter(format!(
            "log profile needs delta > 0 and at least {MIN_LOG_SEGMENTS} segments, got delta={delta}, segments={segments}"
        )));
    }
    let left = left_profile(k, beta_log, delta, segments);
    Ok(match side {
        Side::Left => left,
        Side::Right => reflect_profile(&left),
    })
}

/// Piecewise-linear `(δ/K) ln(1 + s/β)` with `β = e^{beta_log}`, steep at 0
/// (`Left`) or reflected to be steep at 1 (`Right`).
///
/// Breakpoints are equally spaced in `ln(1 + s/β)` with at least four per
/// level band and at least `segments` overall. Abscissae below the smallest
/// normal double are clamped and merged, so the profile is only faithful where
/// it is representable.
pub fn gen_log_boundary(k: f64, beta_log: f64, delta: f64, side: Side, segments: usize) -> Result<PLFunction> {
    PLFunction::new(log_profile(k, beta_log, delta, side, segments)?)
}

/// `bumps` rise-and-fall profiles of height `Mδ` followed by a final rise.
///
/// The domain is cut into `bumps + 1` equal pieces. Each bump rises on the
/// first half of its piece along the right-steep log profile with
/// `K = bump_k`, `ln β = -M·bump_k`, peaks at `Mδ` and falls back along the
/// mirror image; the last piece is a left-steep rise. Profiles are rescaled
/// so every peak and the final value equal `Mδ` exactly. Each profile carries
/// about `max(4M, 64)` breakpoints. Near each peak the profile is resolved only
/// while `M·bump_k` stays below about 35; beyond that the top bands collapse
/// into a single steep segment.
pub fn gen_multibump(bumps: usize, m: i64, delta: f64, bump_k: f64) -> Result<PLFunction> {
    if m < 1 {
        return Err(Error::InvalidParameter(format!("multibump needs M >= 1, got {m}")));
    }
    let beta_log = -(m as f64) * bump_k;
    let target = m as f64 * delta;
    let rescale = |pts: Vec<(f64, f64)>| -> Vec<(f64, f64)> {
        let top = pts[pts.len() - 1].1.max(pts[0].1);
        pts.into_iter().map(|(x, y)| (x, if y == top { target } else { y / top * target })).collect()
    };
    let rise = rescale(log_profile(bump_k, beta_log, delta, Side::Right, MIN_LOG_SEGMENTS)?);
    let last = rescale(log_profile(bump_k, beta_log, delta, Side::Left, MIN_LOG_SEGMENTS)?);
    let width = 1.0 / (bumps + 1) as f64;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for b in 0..bumps {
        let a = b as f64 * width;
        let mid = a + 0.5 * width;
        for &(x, y) in &rise {
            push_merged(&mut pts, a + 0.5 * width * x, y);
        }
        let next = (b + 1) as f64 * width;
        for &(x, y) in rise.iter().rev() {
            let xx = if x == 0.0 { next } else { mid + 0.5 * width * (1.0 - x) };
            push_merged(&mut pts, xx, y);
        }
    }
    let a = bumps as f64 * width;
    for &(x, y) in &last {
        let xx = if x == 1.0 { 1.0 } else { a + (1.0 - a) * x };
        // points that collapse onto the valley are dropped so it stays at 0
        if pts.last().is_none_or(|p| xx > p.0) {
            pts.push((xx, y));
        }
    }
    PLFunction::new(pts)
}

/// Seeded random walk with `segments` pieces, corrected so that `g(0) = 0`
/// and `g(1) = Mδ`, folded to be nonnegative and jittered off flat levels.
pub fn gen_random(seed: u64, segments: usize, m: i64, delta: f64) -> Result<PLFunction> {
    if segments < 2 || m < 0 || !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "random needs segments >= 2, M >= 0 and delta > 0, got segments={segments}, M={m}, delta={delta}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = m as f64 * delta;
    let sigma = top.max(delta) / (segments as f64).sqrt();
    let step = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let gaps: Vec<f64> = (0..segments).map(|_| Exp1.sample(&mut rng)).collect::<Vec<f64>>();
    let total: f64 = gaps.iter().sum();
    let mut xs = Vec::with_capacity(segments + 1);
    let mut acc = 0.0;
    xs.push(0.0);
    for g in &gaps[..segments - 1] {
        acc += g;
        xs.push(acc / total);
    }
    xs.push(1.0);
    let mut ys = vec![0.0];
    for _ in 0..segments {
        let last = ys[ys.len() - 1];
        ys.push(last + step.sample(&mut rng));
    }
    let end = ys[segments];
    for (y, &x) in ys.iter_mut().zip(&xs) {
        *y += (top - end) * x;
    }
    ys[0] = 0.0;
    ys[segments] = top;
    // fold negative excursions, inserting the zero crossings
    let mut pts: Vec<(f64, f64)> = vec![(xs[0], ys[0])];
    for i in 1..=segments {
        let (x0, y0, x1, y1) = (xs[i - 1], ys[i - 1], xs[i], ys[i]);
        if y0 * y1 < 0.0 {
            let xc = x0 + (x1 - x0) * (y0 / (y0 - y1));
            if x0 < xc && xc < x1 {
                pts.push((xc, 0.0));
            }
        }
        pts.push((x1, y1.abs()));
    }
    let g = PLFunction::new(pts)?;
    // a tiny nudge keeps level sets finite; the endpoints are never flat here
    let jittered = if g.flat_level_segments(delta).is_empty() {
        g
    } else {
        g.jitter_levels(delta, delta * rng.random_range(1e-7..1e-6))?
    };
    Ok(jittered)
}

/// Serializable generator request, as used by the CLI and corpus files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Linear { m: i64, delta: f64 },
    LogBoundary { k: f64, beta_log: f64, delta: f64, side: Side, segments: usize },
    Multibump { bumps: usize, m: i64, delta: f64, bump_k: f64 },
    Random { seed: u64, segments: usize, m: i64, delta: f64 },
}

impl GeneratorSpec {
    pub fn generate(&self) -> Result<PLFunction> {
        match *self {
            Self::Linear { m, delta } => gen_linear(m, delta),
            Self::LogBoundary { k, beta_log, delta, side, segments } => gen_log_boundary(k, beta_log, delta, side, segments),
            Self::Multibump { bumps, m, delta, bump_k } => gen_multibump(bumps, m, delta, bump_k),
            Self::Random { seed, segments, m, delta } => gen_random(seed, segments, m, delta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levels::decompose;

    #[test]
    fn linear_examples() {
        let g = gen_linear(8, 0.125).unwrap();
        assert_eq!(g.ys(), &[0.0, 1.0]);
        let g = gen_linear(128, 0.005).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.last_value(), 128.0 * 0.005);
        assert!((g.last_value() - 0.64).abs() < 1e-15);
    }

    #[test]
    fn log_boundary_level_counts() {
        let g = gen_log_boundary(3f64.ln(), -50.0, 0.1, Side::Left, 64).unwrap();
        assert_eq!(decompose(&g, 0.1).unwrap().m(), 45);
        let g = gen_log_boundary(10.0, -50.0, 0.3, Side::Left, 64).unwrap();
        assert_eq!(decompose(&g, 0.3).unwrap().m(), 5);
        assert_eq!(g.first_value(), 0.0);
        // exact log values at the breakpoints
        let beta = (-50f64).exp();
        for (x, y) in g.breakpoints().skip(1).step_by(7) {
            let exact = 0.3 / 10.0 * (x / beta).ln_1p();
            assert!((y - exact).abs() <= 1e-9 * exact.max(1e-300), "{x} {y} {exact}");
        }
    }

    #[test]
    fn log_boundary_right_reflects() {
        let l = gen_log_boundary(10.0, -50.0, 0.3, Side::Left, 64).unwrap();
        let r = gen_log_boundary(10.0, -50.0, 0.3, Side::Right, 64).unwrap();
        assert_eq!(r.last_value() - r.first_value(), l.last_value() - l.first_value());
        let dl = decompose(&l, 0.3).unwrap();
        let dr = decompose(&r, 0.3).unwrap();
        for k in 1..5 {
            let a = dl.level(k).measure();
            let b = dr.level(5 - 1 - k).measure();
            assert!((a - b).abs() < 1e-12, "{k}: {a} vs {b}");
        }
    }

    #[test]
    fn log_boundary_deep_beta_stays_normal() {
        let g = gen_log_boundary(5.0, -640.0, 0.005, Side::Left, 64).unwrap();
        let d = decompose(&g, 0.005).unwrap();
        assert_eq!(d.m(), 128);
        assert!(d.m_exact());
        assert_eq!(g.last_value(), 128.0 * 0.005);
        assert!(g.xs()[1] >= f64::MIN_POSITIVE);
        assert!(gen_log_boundary(5.0, -640.0, 0.005, Side::Left, 10).is_err());
        assert!(gen_log_boundary(-1.0, -64.0, 0.005, Side::Left, 64).is_err());
    }

    #[test]
    fn multibump_variation() {
        let (m, delta) = (128, 1.0 / 256.0);
        let g = gen_multibump(10, m, delta, 5.0).unwrap();
        let tv: f64 = g.segments().map(|s| (s.y1 - s.y0).abs()).sum();
        let expect = 21.0 * m as f64 * delta;
        assert!((tv - expect).abs() < 1e-9 * expect, "{tv} vs {expect}");
        assert_eq!(g.first_value(), 0.0);
        assert_eq!(g.last_value(), m as f64 * delta);
        // every band is visited once the steep ends stay above rounding
        let fine = gen_multibump(10, m, delta, 0.25).unwrap();
        let d = decompose(&fine, delta).unwrap();
        assert!((0..m).all(|k| !d.level(k).is_empty()));
        let plain = gen_multibump(0, m, delta, 5.0).unwrap();
        assert_eq!(plain, gen_log_boundary(5.0, -(m as f64) * 5.0, delta, Side::Left, 64).unwrap());
    }

    #[test]
    fn random_is_deterministic_and_pinned() {
        let a = gen_random(1, 30, 128, 0.005).unwrap();
        let b = gen_random(1, 30, 128, 0.005).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.first_value(), 0.0);
        assert_eq!(a.last_value(), 128.0 * 0.005);
        assert!(a.min_value() >= 0.0);
        assert_ne!(a, gen_random(2, 30, 128, 0.005).unwrap());
    }

    #[test]
    fn spec_round_trip() {
        let s = GeneratorSpec::LogBoundary { k: 5.0, beta_log: -640.0, delta: 0.005, side: Side::Right, segments: 64 };
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"family\":\"log_boundary\""), "{json}");
        assert_eq!(serde_json::from_str::<GeneratorSpec>(&json).unwrap(), s);
        assert!(serde_json::from_str::<GeneratorSpec>(r#"{"family":"linear","m":3,"delta":0.1,"x":1}"#).is_err());
    }
}
