//! Catalog-wide verification of the closed-form proximal operators against
//! the brute-force oracle, plus the Leaky-prox identity.

use mpu_core::{catalog, prox_oracle, verify_leaky_theorem, Potential};
use proptest::prelude::*;

const PROX_TOL: f64 = 1e-7;

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

#[test]
fn every_closed_form_matches_the_oracle() {
    for entry in catalog() {
        let mut worst: f64 = 0.0;
        for x in grid(-6.0, 6.0, 200) {
            let closed = entry.closed_form(x);
            let oracle = prox_oracle(&entry.potential, x, PROX_TOL).unwrap();
            worst = worst.max((closed - oracle).abs());
        }
        assert!(
            worst <= 1e-4,
            "{}: max closed-vs-oracle error {worst}",
            entry.name()
        );
    }
}

#[test]
fn sigmoid_is_exact_at_zero() {
    let sigmoid = catalog()
        .into_iter()
        .find(|e| e.name() == "sigmoid")
        .unwrap();
    assert_eq!(sigmoid.closed_form(0.0), 0.5);
}

#[test]
fn leaky_prox_identity_for_the_three_documented_pairs() {
    let cases: Vec<(Potential, f64, Vec<f64>)> = vec![
        (
            Potential::indicator_nonneg(64.0),
            1.0 / 99.0,
            grid(-5.0, 5.0, 21),
        ),
        (Potential::abs(64.0), 1.0, grid(-3.0, 3.0, 13)),
        (
            catalog()
                .into_iter()
                .find(|e| e.name() == "sigmoid")
                .unwrap()
                .potential,
            0.5,
            grid(-4.0, 4.0, 17),
        ),
    ];
    for (g, lambda, samples) in cases {
        let err = verify_leaky_theorem(&g, lambda, &samples, PROX_TOL).unwrap();
        assert!(
            err <= 1e-3,
            "{} with lambda {lambda}: max error {err}",
            g.name()
        );
    }
}

#[test]
fn leaky_relu_instance_reproduces_the_standard_slope() {
    // The lambda = 1/99 envelope of the half-line indicator has prox
    // 0.99 ReLU(x) + 0.01 x: check the catalog entry pointwise.
    let leaky = catalog()
        .into_iter()
        .find(|e| e.name() == "leaky_relu")
        .unwrap();
    for x in grid(-5.0, 5.0, 101) {
        let want = 0.99 * x.max(0.0) + 0.01 * x;
        assert!((leaky.closed_form(x) - want).abs() < 1e-12);
        let oracle = prox_oracle(&leaky.potential, x, PROX_TOL).unwrap();
        assert!((oracle - want).abs() < 1e-4);
    }
}

proptest! {
    #[test]
    fn prox_maps_are_one_lipschitz(x in -8.0..8.0f64, y in -8.0..8.0f64) {
        for entry in catalog() {
            let fx = entry.closed_form(x);
            let fy = entry.closed_form(y);
            prop_assert!(
                (fx - fy).abs() <= (x - y).abs() + 1e-8,
                "{} expands: |f({x}) - f({y})| = {}",
                entry.name(),
                (fx - fy).abs()
            );
        }
    }
}
