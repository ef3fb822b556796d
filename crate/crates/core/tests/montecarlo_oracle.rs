//! Monte Carlo against the closed forms.

use std::f64::consts::PI;

use lhv_core::montecarlo::DEFAULT_BATCHES;
use lhv_core::{
    ch_with_memory, coincidence_closed, estimate_ch_mc, memory_adjusted_rates, paper_model, rates_closed,
    simulate_run, Angle, MemoryKind, MemoryRule, RunConfig, Tally,
};

fn rules() -> Vec<MemoryRule> {
    vec![
        MemoryRule::memoryless(),
        MemoryRule::inhibit(1.0).unwrap(),
        MemoryRule::enhance(1.0).unwrap(),
        MemoryRule::inhibit(0.5).unwrap(),
        MemoryRule::enhance(0.5).unwrap(),
    ]
}

#[test]
fn memoryless_coincidences_at_reference_angle() {
    let phi = Angle::radians(PI / 8.0);
    let cfg = RunConfig::at_phi(phi, MemoryRule::memoryless(), 1_000_000, 2024);
    let r = simulate_run(&paper_model(), &cfg).unwrap();
    let expected = coincidence_closed(&paper_model(), phi);
    assert!((expected - 0.1896785).abs() < 1e-7);
    assert!(r.p_ab.stderr > 2.5e-4 && r.p_ab.stderr < 3.0e-4, "{}", r.p_ab.stderr);
    assert!(r.p_ab.within(expected, 3.0), "{:?} vs {expected}", r.p_ab);
}

#[test]
fn inhibited_singles_at_reference_angle() {
    let cfg = RunConfig::at_phi(Angle::radians(PI / 8.0), MemoryRule::inhibit(1.0).unwrap(), 1_000_000, 77);
    let r = simulate_run(&paper_model(), &cfg).unwrap();
    let p_a = r.batch_estimate(Tally::p_a);
    assert!(p_a.within(5.0 / 18.0, 3.0), "{p_a:?}");
}

#[test]
fn estimates_agree_with_closed_forms_across_seeds() {
    let model = paper_model();
    let n_pairs = 20_000;
    let seeds = 100u64;
    for rule in rules() {
        for phi in [0.0, PI / 8.0, PI / 4.0, 3.0 * PI / 8.0] {
            let phi = Angle::radians(phi);
            let exact = ch_with_memory(&model, &rule, phi).unwrap();
            let mut passed = 0;
            for seed in 0..seeds {
                let est = estimate_ch_mc(&model, &rule, phi, n_pairs, seed).unwrap();
                let p_a = est.at_phi.batch_estimate(Tally::p_a);
                let p_ab = est.at_phi.batch_estimate(Tally::p_ab);
                if p_a.within(exact.rates_phi.p_a, 4.0)
                    && p_ab.within(exact.rates_phi.p_ab, 4.0)
                    && est.b.within(exact.b, 4.0)
                {
                    passed += 1;
                }
            }
            assert!(
                passed >= 99,
                "{:?} s={} phi={}: {passed}/{seeds}",
                rule.kind(),
                rule.strength(),
                phi.rad()
            );
        }
    }
}

#[test]
fn tallies_are_consistent() {
    for rule in rules() {
        for seed in 0..5 {
            let cfg = RunConfig::at_phi(Angle::radians(0.3 * seed as f64), rule, 5_000, seed);
            let r = simulate_run(&paper_model(), &cfg).unwrap();
            assert!(r.tally.is_consistent());
            assert!(r.batches.iter().all(Tally::is_consistent));
            assert_eq!(r.tally.events, 10_000);
        }
    }
}

#[test]
fn memoryless_coincidences_exceed_product_of_singles() {
    let cfg = RunConfig::at_phi(Angle::radians(0.0), MemoryRule::memoryless(), 200_000, 5);
    let r = simulate_run(&paper_model(), &cfg).unwrap();
    let p_ab = r.batch_estimate(Tally::p_ab);
    assert!(p_ab.value >= r.p_a.value * r.p_b.value - 4.0 * p_ab.stderr);
    // 17/72 against 1/9: the correlation through λ is strong
    assert!(p_ab.value > r.p_a.value * r.p_b.value);
}

#[test]
fn singles_are_monotone_in_strength() {
    let strengths = [0.0, 0.25, 0.5, 0.75, 1.0];
    for kind in [MemoryKind::Inhibit, MemoryKind::Enhance] {
        let estimates: Vec<_> = strengths
            .iter()
            .map(|&s| {
                let rule = MemoryRule::new(kind, s).unwrap();
                let cfg = RunConfig::at_phi(Angle::radians(PI / 8.0), rule, 200_000, 31);
                simulate_run(&paper_model(), &cfg).unwrap().batch_estimate(Tally::p_a)
            })
            .collect();
        for w in estimates.windows(2) {
            let slack = 3.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
            match kind {
                MemoryKind::Inhibit => assert!(w[1].value <= w[0].value + slack, "{kind:?} {w:?}"),
                _ => assert!(w[1].value >= w[0].value - slack, "{kind:?} {w:?}"),
            }
        }
    }
}

#[test]
fn fractional_strength_algebra_matches_simulation() {
    let model = paper_model();
    let phi = Angle::radians(0.6);
    for kind in [MemoryKind::Inhibit, MemoryKind::Enhance] {
        for s in [0.3, 0.7] {
            let rule = MemoryRule::new(kind, s).unwrap();
            let exact = memory_adjusted_rates(&rates_closed(&model, phi), &rule).unwrap();
            let r = simulate_run(&model, &RunConfig::at_phi(phi, rule, 500_000, 99)).unwrap();
            let p_a = r.batch_estimate(Tally::p_a);
            let p_ab = r.batch_estimate(Tally::p_ab);
            assert!(p_a.within(exact.p_a, 4.0), "{kind:?} s={s} {p_a:?} vs {}", exact.p_a);
            assert!(p_ab.within(exact.p_ab, 4.0), "{kind:?} s={s} {p_ab:?} vs {}", exact.p_ab);
        }
    }
}

#[test]
fn batch_count_is_respected() {
    let cfg = RunConfig::at_phi(Angle::radians(0.1), MemoryRule::memoryless(), 1_000, 1);
    assert_eq!(simulate_run(&paper_model(), &cfg).unwrap().batches.len(), DEFAULT_BATCHES);
}
