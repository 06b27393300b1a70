use std::sync::Arc;

use kirchhoff_core::presets::{catalog, find, Regime};
use kirchhoff_core::{gevrey_norm, FunctionSpec, GevreyParams, SpectralVector, Spectrum};
use proptest::prelude::*;

fn spectrum(n: usize) -> Arc<Spectrum> {
    Spectrum::powers(n, 1.0).unwrap().shared()
}

fn vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, 12)
}

fn weight() -> impl Strategy<Value = FunctionSpec> {
    prop_oneof![
        Just(FunctionSpec::constant(1.0)),
        (0.1..1.0f64).prop_map(FunctionSpec::power),
        Just(FunctionSpec::log_power(0.0, 1.0, 1.0)),
    ]
}

fn leaf_spec() -> impl Strategy<Value = FunctionSpec> {
    prop_oneof![
        (0.1..10.0f64).prop_map(FunctionSpec::constant),
        (0.1..5.0f64, 0.0..5.0f64).prop_map(|(a, b)| FunctionSpec::affine(a, b)),
        (0.1..3.0f64).prop_map(FunctionSpec::power),
        (0.1..5.0f64, -1.0..5.0f64).prop_map(|(a, b)| FunctionSpec::pohozaev(a, b)),
        Just(FunctionSpec::LogLipschitz),
        (0.0..2.0f64, 0.0..3.0f64).prop_map(|(p, q)| FunctionSpec::log_power(p, q, 0.0)),
    ]
}

fn any_spec() -> impl Strategy<Value = FunctionSpec> {
    leaf_spec().prop_recursive(2, 6, 1, |inner| {
        prop_oneof![
            (inner.clone(), 0.0..1.0f64).prop_map(|(b, f)| b.at_least(f)),
            (inner.clone(), 0.1..4.0f64).prop_map(|(b, k)| b.with_linear_tail(k)),
            (inner.clone(), -1.0..1.0f64).prop_map(|(b, s)| b.shifted(s)),
            inner.clone().prop_map(FunctionSpec::strict_dual),
            inner.prop_map(FunctionSpec::weak_dual),
        ]
    })
}

fn norm(u: &[f64], p: &GevreyParams) -> f64 {
    gevrey_norm(&SpectralVector::new(spectrum(u.len()), u.to_vec()).unwrap(), p).unwrap()
}

proptest! {
    #[test]
    fn norm_is_homogeneous(u in vector(), c in -5.0..5.0f64, phi in weight(), r in 0.0..1.0f64) {
        let p = GevreyParams::new(phi, r, 0.25).unwrap();
        let scaled: Vec<f64> = u.iter().map(|x| c * x).collect();
        let (lhs, rhs) = (norm(&scaled, &p), c.abs() * norm(&u, &p));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn norm_satisfies_triangle_inequality(u in vector(), w in vector(), phi in weight(), r in 0.0..1.0f64) {
        let p = GevreyParams::new(phi, r, 0.5).unwrap();
        let sum: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a + b).collect();
        prop_assert!(norm(&sum, &p) <= (norm(&u, &p) + norm(&w, &p)) * (1.0 + 1e-12));
    }

    #[test]
    fn norm_grows_with_radius_and_exponent(u in vector(), phi in weight(), r in 0.0..1.0f64, dr in 0.0..1.0f64, alpha in 0.0..1.0f64) {
        let base = norm(&u, &GevreyParams::new(phi.clone(), r, alpha).unwrap());
        prop_assert!(norm(&u, &GevreyParams::new(phi.clone(), r + dr, alpha).unwrap()) >= base * (1.0 - 1e-14));
        prop_assert!(norm(&u, &GevreyParams::new(phi, r, alpha + 0.25).unwrap()) >= base * (1.0 - 1e-14));
    }

    #[test]
    fn function_spec_survives_json(spec in any_spec()) {
        let text = serde_json::to_string(&spec).unwrap();
        let back: FunctionSpec = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn zero_vector_has_zero_norm(phi in weight(), r in 0.0..2.0f64, alpha in 0.0..2.0f64) {
        let p = GevreyParams::new(phi, r, alpha).unwrap();
        prop_assert_eq!(norm(&[0.0; 12], &p), 0.0);
    }
}

#[test]
fn presets_round_trip_through_json() {
    for bundle in catalog() {
        let text = serde_json::to_string(&bundle).unwrap();
        let back: kirchhoff_core::presets::PresetBundle = serde_json::from_str(&text).unwrap();
        assert_eq!(back, bundle);
    }
}

#[test]
fn catalog_is_sorted_and_stable() {
    let names: Vec<String> = catalog().into_iter().map(|b| b.name).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert!(!names.is_empty());
    assert_eq!(names, sorted);
    assert_eq!(catalog(), catalog());
}

#[test]
fn named_presets_carry_their_weights() {
    let holder = find("table2_holder_beta").unwrap();
    let beta = kirchhoff_core::presets::HOLDER_BETA;
    for s in [1.5, 3.0, 40.0] {
        assert!((holder.phi.eval(s) - s.powf(2.0 / (beta + 2.0))).abs() < 1e-12 * s);
    }
    let loglog = find("table3_loglog").unwrap();
    assert_eq!(loglog.regime, Regime::Loss);
    for s in [20.0, 1e3, 1e5] {
        assert!((loglog.phi.eval(s) - s / s.ln()).abs() < 1e-9 * s);
    }
    let sigma: f64 = 1e-3;
    assert!((loglog.omega.eval(sigma) - 1.0 / sigma.ln().abs().sqrt()).abs() < 1e-12);
}
