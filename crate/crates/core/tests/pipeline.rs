//! Cross-module invariants on generated functions.

use proptest::prelude::*;

use deglab::corpus::CorpusSpec;
use deglab::generators::{gen_log_boundary, gen_random};
use deglab::integral::{integral_exact, integral_montecarlo, IntegralRequest, Square};
use deglab::lemmas::check_lemmas;
use deglab::levels::{satisfied_set_with, SearchOptions};
use deglab::structure::{analyze, verify_witness, Side, Verdict, WitnessSide};
use deglab::{decompose, Exec, PhaseFunction};

fn exact(g: &deglab::PLFunction, delta: f64) -> f64 {
    integral_exact(&IntegralRequest::new(g, delta).unwrap()).value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn integral_decreases_in_delta(seed in 0u64..10_000, d1 in 0.002f64..0.05, d2 in 0.002f64..0.05) {
        let g = gen_random(seed, 12, 40, 0.005).unwrap();
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(exact(&g, hi) <= exact(&g, lo) * (1.0 + 1e-12));
    }

    #[test]
    fn reflection_and_shift_preserve_the_integral(seed in 0u64..10_000, c in -3.0f64..3.0) {
        let g = gen_random(seed, 12, 40, 0.005).unwrap();
        let v = exact(&g, 0.01);
        prop_assert!((exact(&g.reflect(), 0.01) - v).abs() <= 1e-9 * v);
        prop_assert!((exact(&g.shift(c), 0.01) - v).abs() <= 1e-9 * v);
    }
}

#[test]
fn exact_agrees_with_montecarlo_on_two_periods() {
    for seed in 0..5 {
        let phi = PhaseFunction::new(gen_random(seed, 20, 128, 0.005).unwrap()).unwrap();
        let req = IntegralRequest::phase(&phi, 0.005, Square::Double).unwrap();
        let e = integral_exact(&req).value;
        let mc = integral_montecarlo(&req, 2_000_000, seed).unwrap();
        assert!((e - mc.value).abs() <= 5.0 * mc.error_estimate, "seed {seed}: {e} vs {mc:?}");
    }
}

#[test]
fn grid_search_only_adds_validated_indices() {
    for seed in 0..5 {
        let d = decompose(&gen_random(seed, 30, 128, 0.005).unwrap(), 0.005).unwrap();
        let lattice = satisfied_set_with(&d, &SearchOptions { grid: None, exec: Exec::Sequential });
        let both = satisfied_set_with(&d, &SearchOptions { grid: Some(512), exec: Exec::Sequential });
        assert!(lattice.satisfied.iter().all(|k| both.is_satisfied(*k)));
        for k in &both.satisfied {
            let w = both.witness_intervals[k];
            let iv = w.interval;
            assert!(d.level(*k).measure_in(iv.lo, iv.hi) > 0.01 * iv.measure());
            assert!(d.neighbors(*k).complement().measure_in(iv.lo, iv.hi) > 0.01 * iv.measure());
        }
    }
}

#[test]
fn steep_left_boundary_yields_a_verified_witness() {
    let g = gen_log_boundary(5.0, -640.0, 0.005, Side::Left, 64).unwrap();
    let a = analyze(&g, 0.005, &SearchOptions::default()).unwrap();
    match &a.verdict {
        Verdict::WitnessFound { witness } => {
            assert_eq!(witness.side, WitnessSide::GrowthNear0);
            assert!(verify_witness(&a.decomposition, witness));
            assert!(witness.entries.windows(2).all(|w| w[0].k < w[1].k && w[0].tau > 3.0 * w[1].tau));
        }
        v => panic!("expected a witness, got {v:?}"),
    }
}

#[test]
fn lemmas_hold_on_a_small_corpus() {
    let spec = CorpusSpec { deltas: vec![0.005], random_count: 20, ..Default::default() };
    for e in spec.entries() {
        let a = analyze(&e.generate().unwrap(), e.delta, &SearchOptions::default()).unwrap();
        assert!(!matches!(a.verdict, Verdict::Inconclusive { .. }), "{}", e.id);
        let r = check_lemmas(&a, Exec::Parallel);
        assert!(r.counterexamples.is_empty(), "{}: {:?}", e.id, r.counterexamples);
    }
}
