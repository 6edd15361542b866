mod oracles;

use ntci_core::rng::{self, Purpose};
use ntci_core::tci::{alpha, beta, c_lambda, l2_coefficients, uniform_coefficients, AlphaVariant, L2Case};
use proptest::prelude::*;
use rand::Rng;

/// Overflowing bounds are `+∞` on both sides.
fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * b.abs().max(1e-300)
}

#[test]
fn reference_values() {
    let a = alpha(1.0, 0.0, 1.0, 0.0, 1.0, AlphaVariant::Proved).unwrap();
    let b = beta(1.0, 0.0, 1.0, 0.0).unwrap();
    assert!((a - 2.0).abs() < 1e-12, "{a}");
    assert!((b - 2.0).abs() < 1e-12, "{b}");
    assert!((c_lambda(0.0, 0.0, 2.0, 1.0, 1.0).unwrap() - 4.0).abs() < 1e-12);
}

#[test]
fn closed_forms_agree_with_rederived_oracle_on_random_tuples() {
    let mut r = rng::stream(2024, Purpose::Sampler, 0);
    for _ in 0..1000 {
        let t = r.random_range(0.05..5.0);
        let kappa = r.random_range(0.0..0.9);
        let l1 = r.random_range(-2.0..3.0);
        let l2 = if r.random_bool(0.2) { 0.0 } else { r.random_range(0.0..2.0) };
        let l3 = r.random_range(0.1..3.0);
        for (variant, e2) in [(AlphaVariant::Proved, 16.0), (AlphaVariant::Printed, 4.0)] {
            let got = alpha(t, kappa, l1, l2, l3, variant).unwrap();
            let want = oracles::alpha(t, kappa, l1, l2, l3, e2);
            assert!(rel_close(got, want, 1e-12), "alpha {variant:?} ({t},{kappa},{l1},{l2},{l3}): {got} vs {want}");
        }
        let got = beta(t, kappa, l1, l2).unwrap();
        let want = oracles::beta(t, kappa, l1, l2);
        assert!(rel_close(got, want, 1e-12), "beta ({t},{kappa},{l1},{l2}): {got} vs {want}");

        let k: f64 = r.random_range(0.0..0.9);
        let k2: f64 = r.random_range(0.0..2.0);
        let k1 = k2 + r.random_range(-1.0..2.0);
        let lambda = if k1 > k2 && r.random_bool(0.3) {
            0.0
        } else {
            ((k2 - k1) / ((1.0 - k) * (1.0 - k))).max(0.0) + r.random_range(0.01..3.0)
        };
        let got = c_lambda(lambda, k, k1, k2, l3).unwrap();
        let want = oracles::c_lambda(lambda, k, k1, k2, l3);
        assert!(rel_close(got, want, 1e-12), "C({lambda},{k},{k1},{k2}): {got} vs {want}");
    }
}

#[test]
fn c_lambda_is_strictly_decreasing() {
    let (k, k1, k2, l3) = (0.3, 0.5, 1.0, 1.0);
    let start = (k2 - k1) / ((1.0 - k) * (1.0 - k)) + 0.01;
    let mut prev = f64::INFINITY;
    for i in 0..100 {
        let l = start + 0.05 * i as f64;
        let c = c_lambda(l, k, k1, k2, l3).unwrap();
        assert!(c < prev);
        prev = c;
    }
}

proptest! {
    #[test]
    fn alpha_positive_beta_at_least_one(
        t in 0.01f64..10.0,
        kappa in 0.0f64..0.95,
        l1 in -3.0f64..3.0,
        l2 in 0.0f64..3.0,
        l3 in 0.01f64..5.0,
    ) {
        let a = alpha(t, kappa, l1, l2, l3, AlphaVariant::Proved).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!(beta(t, kappa, l1, l2).unwrap() >= 1.0);
        let co = uniform_coefficients(t, kappa, l1, l2, l3, AlphaVariant::Proved).unwrap();
        prop_assert!(rel_close(co.entropy * co.entropy, a, 1e-12));
    }

    #[test]
    fn entropy_coefficient_matches_c_lambda(
        k in 0.0f64..0.9,
        k2 in 0.0f64..2.0,
        gap in 0.01f64..2.0,
        l3 in 0.1f64..3.0,
        tau in 0.1f64..2.0,
    ) {
        let k1 = k2 + gap;
        let co = l2_coefficients(L2Case::Contractive, k, k1, k2, l3, tau).unwrap();
        let c = c_lambda(0.0, k, k1, k2, l3).unwrap();
        prop_assert!((co.entropy * co.entropy - 2.0 * c).abs() <= 1e-12 * c);
    }
}
