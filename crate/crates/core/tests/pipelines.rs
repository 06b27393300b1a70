use std::sync::Arc;

use kirchhoff_core::analysis::{classify_degeneracy, reachable_sigma_grid, Degeneracy};
use kirchhoff_core::dynamics::{coefficient_trace, higher_order_energy};
use kirchhoff_core::spectral_gap::{sum_decompose, DecomposeOptions};
use kirchhoff_core::{evolve, hamiltonian, FunctionSpec, IntegratorConfig, SpectralState, SpectralVector, Spectrum};

fn spectrum(n: usize) -> Arc<Spectrum> {
    Spectrum::powers(n, 1.0).unwrap().shared()
}

fn state(u: Vec<f64>, v: Vec<f64>) -> SpectralState {
    let sp = spectrum(u.len());
    SpectralState::new(0.0, SpectralVector::new(sp.clone(), u).unwrap(), SpectralVector::new(sp, v).unwrap()).unwrap()
}

#[test]
fn interpolated_linear_run_matches_closed_form() {
    let init = state(vec![0.3, -0.2, 0.1], vec![0.0, 0.5, 0.05]);
    let tr = evolve(&init, &FunctionSpec::constant(1.0), &IntegratorConfig::default(), 2.0).unwrap();
    for t in [0.123, 0.77, 1.5] {
        let s = tr.interpolate(t).unwrap();
        for k in 0..3 {
            let l = (k + 1) as f64;
            let exact = init.u.components()[k] * (l * t).cos() + init.v.components()[k] / l * (l * t).sin();
            assert!((s.u.components()[k] - exact).abs() < 1e-7, "t = {t}, k = {k}");
        }
    }
}

#[test]
fn both_energies_are_conserved_when_m_is_one() {
    let init = state(vec![0.4, 0.1, -0.3, 0.05], vec![0.2, 0.0, 0.1, -0.1]);
    let m = FunctionSpec::constant(1.0);
    let tr = evolve(&init, &m, &IntegratorConfig::default(), 5.0).unwrap();
    let h0 = hamiltonian(tr.initial(), &m).unwrap();
    let e0 = higher_order_energy(tr.initial());
    for s in tr.states() {
        assert!((hamiltonian(s, &m).unwrap() - h0).abs() < 1e-8 * h0);
        assert!((higher_order_energy(s) - e0).abs() < 1e-8 * e0);
    }
}

#[test]
fn single_mode_coefficient_oscillates() {
    let init = state(vec![1.0], vec![0.0]);
    let m = FunctionSpec::power(1.0);
    let tr = evolve(&init, &m, &IntegratorConfig::default(), 20.0).unwrap();
    let trace = coefficient_trace(&tr, &m, None);
    assert!(trace.period.is_some_and(|p| p > 0.0 && p < 20.0));
    assert!(trace.values.iter().all(|c| (0.0..=1.0 + 1e-9).contains(c)));
}

#[test]
fn degenerate_nonlinearity_is_classified() {
    let init = state(vec![1.0, 0.0], vec![0.0, 0.0]);
    let m = FunctionSpec::power(1.0);
    let grid = reachable_sigma_grid(&init, &m, 64).unwrap();
    assert_eq!(classify_degeneracy(&m, &init.u, &grid), Degeneracy::MildlyDegenerate);
    let strict = FunctionSpec::affine(1.0, 1.0);
    let grid = reachable_sigma_grid(&init, &strict, 64).unwrap();
    assert_eq!(classify_degeneracy(&strict, &init.u, &grid), Degeneracy::StrictlyHyperbolic);
}

#[test]
fn decomposed_parts_keep_their_support_under_evolution() {
    let sp = spectrum(32);
    let u = SpectralVector::from_fn(sp, |_, l| (-0.5 * l).exp());
    let phi = FunctionSpec::power(1.0);
    let d = sum_decompose(&u, &u.scaled(0.5), &phi, 0.25, 2.0, &DecomposeOptions::default()).unwrap();
    let m = FunctionSpec::affine(1.0, 1.0);
    let cfg = IntegratorConfig::default();
    for (u0, u1) in [(&d.bar_u0, &d.bar_u1), (&d.hat_u0, &d.hat_u1)] {
        let tr = evolve(&SpectralState::new(0.0, u0.clone(), u1.clone()).unwrap(), &m, &cfg, 1.0).unwrap();
        assert!(tr.is_complete());
        let support: Vec<bool> = u0.components().iter().map(|x| *x != 0.0).collect();
        for s in tr.states() {
            for (x, on) in s.u.components().iter().zip(&support) {
                assert!(*on || *x == 0.0);
            }
        }
    }
}
