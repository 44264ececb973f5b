//! Truth-table oracle for both coincidence logics: the closed-form transfer
//! elements must equal exhaustive enumeration of the Boolean expressions
//! over all joint Bernoulli outcomes.

mod common;

use common::{
    build_channels, enumerate_full_logic, enumerate_simple_logic, ChannelParams, TestDraws,
};
use trifold_core::metrics::{transfer_elements_full, transfer_elements_simple, SourceSpec};

const TOL: f64 = 1e-12;

fn random_params(draws: &mut TestDraws, n: usize) -> Vec<ChannelParams> {
    (0..n)
        .map(|_| {
            (
                draws.uniform(),
                draws.uniform(),
                draws.uniform(),
                draws.uniform(),
            )
        })
        .collect()
}

#[test]
fn simple_logic_matches_enumeration_on_random_configs() {
    let mut draws = TestDraws::new(101);
    for case in 0..100 {
        let n = 2 + case % 2;
        let params = random_params(&mut draws, n);
        let channels = build_channels(&params, 0.0);
        let t = transfer_elements_simple(&channels).unwrap();
        let expected_signal = enumerate_simple_logic(&params, true);
        let expected_noise = enumerate_simple_logic(&params, false);
        assert!(
            (t.p_coincidence_given_signal().value() - expected_signal).abs() <= TOL,
            "case {case}: p(C|S) {} vs {expected_signal}",
            t.p_coincidence_given_signal().value()
        );
        assert!(
            (t.p_coincidence_given_no_signal().value() - expected_noise).abs() <= TOL,
            "case {case}: p(C|S̄) {} vs {expected_noise}",
            t.p_coincidence_given_no_signal().value()
        );
    }
}

#[test]
fn full_logic_matches_enumeration_on_random_configs() {
    let mut draws = TestDraws::new(202);
    for case in 0..100 {
        let n = 2 + case % 2;
        let params = random_params(&mut draws, n);
        let p_gen = draws.uniform();
        let channels = build_channels(&params, 0.0);
        let source = SourceSpec::new(1e-7, 0.5)
            .unwrap()
            .with_gen_noise(p_gen)
            .unwrap();
        let t = transfer_elements_full(&channels, &source).unwrap();
        let expected_signal = enumerate_full_logic(&params, p_gen, true);
        let expected_noise = enumerate_full_logic(&params, p_gen, false);
        assert!(
            (t.p_coincidence_given_signal().value() - expected_signal).abs() <= TOL,
            "case {case}: p(C|S) {} vs {expected_signal}",
            t.p_coincidence_given_signal().value()
        );
        assert!(
            (t.p_coincidence_given_no_signal().value() - expected_noise).abs() <= TOL,
            "case {case}: p(C|S̄) {} vs {expected_noise}",
            t.p_coincidence_given_no_signal().value()
        );
    }
}

#[test]
fn spec_hand_example_two_channels() {
    // n = 2, p_A = 0.5, p_D = 0.1: p(C|S) = (0.9*0.5 + 0.1)^2 = 0.3025,
    // and the enumeration agrees.
    let params = vec![(0.5, 0.0, 0.1, 1.0); 2];
    let expected = enumerate_simple_logic(&params, true);
    assert!((expected - 0.3025).abs() < 1e-15);
    let t = transfer_elements_simple(&build_channels(&params, 0.0)).unwrap();
    assert!((t.p_coincidence_given_signal().value() - expected).abs() <= TOL);
}
