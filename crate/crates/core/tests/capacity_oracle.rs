//! Capacity closed form against brute-force mutual-information
//! maximization, and the symmetric-channel reduction.

mod common;

use common::{brute_force_capacity, TestDraws};
use trifold_core::channel::{binary_entropy, TransferMatrix};

#[test]
fn capacity_matches_brute_force_on_random_channels() {
    let mut draws = TestDraws::new(31337);
    let mut cases = 0;
    while cases < 100 {
        let a = draws.uniform();
        let b = draws.uniform();
        if (a - b).abs() < 1e-6 {
            continue; // almost-degenerate channels excluded by precondition
        }
        cases += 1;
        let t = TransferMatrix::from_values(a, b).unwrap();
        let closed = t.capacity_bits();
        let brute = brute_force_capacity(a, b);
        assert!(
            (closed - brute).abs() <= 1e-7,
            "a={a}, b={b}: closed {closed} vs brute {brute}"
        );
    }
}

#[test]
fn capacity_reduces_on_symmetric_channels() {
    // t = (p, 1-p) must give 1 - H_b(p) across the grid p = 0.01..0.49.
    for i in 1..=49 {
        let p = i as f64 / 100.0;
        let t = TransferMatrix::from_values(p, 1.0 - p).unwrap();
        let expected = 1.0 - binary_entropy(p).unwrap();
        assert!(
            (t.capacity_bits() - expected).abs() < 1e-9,
            "p = {p}: {} vs {expected}",
            t.capacity_bits()
        );
    }
}

#[test]
fn capacity_matches_brute_force_on_snspd_like_channel() {
    // Strongly asymmetric channel of the kind the instrument produces.
    let t = TransferMatrix::from_values(5e-6, 0.729).unwrap();
    let brute = brute_force_capacity(5e-6, 0.729);
    assert!(
        (t.capacity_bits() - brute).abs() <= 1e-9,
        "closed {} vs brute {brute}",
        t.capacity_bits()
    );
    // Frozen from the extended-precision oracle run.
    assert!((t.capacity_bits() - 0.534689158678778).abs() < 1e-10);
}
