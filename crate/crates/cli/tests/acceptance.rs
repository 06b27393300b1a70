//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use kirchhoff_cli::{run_scenario, Overrides, TaskRegistry};
use kirchhoff_core::analysis::{as_quantities, continuous_dependence_study, fit_rate, DependenceProblem};
use kirchhoff_core::conditions::default_condition_grid;
use kirchhoff_core::presets::{catalog, Regime};
use kirchhoff_core::spectral_gap::{sum_decompose, DecomposeOptions};
use kirchhoff_core::trajectory::{
    psi_initial_derivatives, psi_trace, reparametrization_check, round_trip_deviation, solve_parametrization,
    solve_trajectory_system, SpeedTable,
};
use kirchhoff_core::{
    check_phi_condition, evolve, pohozaev_invariant, FunctionSpec, IntegratorConfig, SpectralState,
    SpectralVector, Spectrum,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn spectrum(n: usize) -> Arc<Spectrum> {
    Spectrum::powers(n, 1.0).unwrap().shared()
}

fn random_vector(rng: &mut ChaCha8Rng, sp: &Arc<Spectrum>) -> SpectralVector {
    let c = (1..=sp.len())
        .map(|k| rng.gen_range(-1.0..1.0) / (k as f64).powi(2))
        .collect();
    SpectralVector::new(sp.clone(), c).unwrap()
}

fn random_state(seed: u64, n: usize) -> SpectralState {
    let sp = spectrum(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_vector(&mut rng, &sp);
    let v = random_vector(&mut rng, &sp);
    SpectralState::new(0.0, u, v).unwrap()
}

fn nonlinear_presets() -> Vec<(&'static str, FunctionSpec)> {
    vec![
        ("1+σ", FunctionSpec::affine(1.0, 1.0)),
        ("σ", FunctionSpec::power(1.0)),
        ("σ²", FunctionSpec::power(2.0)),
        ("(1+σ)^-2", FunctionSpec::pohozaev(1.0, 1.0)),
    ]
}

fn tight() -> IntegratorConfig {
    IntegratorConfig::with_tolerance(1e-10)
}

fn within(budget: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    if took <= budget {
        Ok(())
    } else {
        Err(format!("runtime {:.2}s exceeds {:.0}s", took.as_secs_f64(), budget.as_secs_f64()))
    }
}

fn linear_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for c0 in [1.0, 4.0] {
        let init = random_state(1, 32);
        let tr = evolve(&init, &FunctionSpec::constant(c0), &tight(), 1.0).map_err(|e| e.to_string())?;
        let lambdas = init.spectrum().lambdas();
        for s in tr.states() {
            for (k, l) in lambdas.iter().enumerate() {
                let w = c0.sqrt() * l;
                let exact = init.u.components()[k] * (w * s.t).cos() + init.v.components()[k] / w * (w * s.t).sin();
                worst = worst.max((s.u.components()[k] - exact).abs());
            }
        }
    }
    within(Duration::from_secs(2), start)?;
    let line = format!("max component error {worst:.2e} (≤ 1e-8)");
    if worst <= 1e-8 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn hamiltonian_conservation() -> Outcome {
    let start = Instant::now();
    let cases: Vec<(usize, u64)> = (0..4).flat_map(|i| (0..10).map(move |s| (i, 100 + s))).collect();
    let presets = nonlinear_presets();
    let drifts: Vec<Result<f64, String>> = cases
        .par_iter()
        .map(|&(i, seed)| {
            let tr = evolve(&random_state(seed, 32), &presets[i].1, &tight(), 10.0).map_err(|e| e.to_string())?;
            if !tr.is_complete() {
                return Err(format!("{} seed {seed}: {:?}", presets[i].0, tr.status));
            }
            Ok(tr.hamiltonian.as_ref().ok_or("no Hamiltonian")?.max_relative_drift)
        })
        .collect();
    let mut worst = 0.0f64;
    for d in drifts {
        worst = worst.max(d?);
    }
    within(Duration::from_secs(30), start)?;
    let line = format!("worst relative drift {worst:.2e} over 40 runs (≤ 1e-7)");
    if worst <= 1e-7 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn pohozaev_drift(m: &FunctionSpec, seed: u64) -> Result<f64, String> {
    let tr = evolve(&random_state(seed, 32), m, &tight(), 10.0).map_err(|e| e.to_string())?;
    let values: Vec<f64> = tr
        .states()
        .iter()
        .map(|s| pohozaev_invariant(s, 1.0, 1.0))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    Ok(values.iter().map(|p| ((p - values[0]) / values[0]).abs()).fold(0.0, f64::max))
}

fn pohozaev() -> Outcome {
    let mut conserved = 0.0f64;
    let mut control = f64::INFINITY;
    for seed in 200..205 {
        conserved = conserved.max(pohozaev_drift(&FunctionSpec::pohozaev(1.0, 1.0), seed)?);
        control = control.min(pohozaev_drift(&FunctionSpec::affine(1.0, 1.0), seed)?);
    }
    let line = format!("(1+σ)^-2 drift {conserved:.2e} (≤ 1e-6); control 1+σ drift {control:.2e} (≥ 1e-3)");
    if conserved <= 1e-6 && control >= 1e-3 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn reversibility() -> Outcome {
    let mut worst = 0.0f64;
    for (name, m) in nonlinear_presets() {
        for seed in 300..303 {
            let init = random_state(seed, 32);
            let fwd = evolve(&init, &m, &tight(), 5.0).map_err(|e| e.to_string())?;
            let end = fwd.last();
            let flipped = SpectralState::new(0.0, end.u.clone(), end.v.scaled(-1.0)).unwrap();
            let back = evolve(&flipped, &m, &tight(), 5.0).map_err(|e| e.to_string())?;
            if !(fwd.is_complete() && back.is_complete()) {
                return Err(format!("{name} seed {seed} did not complete"));
            }
            let last = back.last();
            for k in 0..init.u.len() {
                worst = worst.max((last.u.components()[k] - init.u.components()[k]).abs());
                worst = worst.max((-last.v.components()[k] - init.v.components()[k]).abs());
            }
        }
    }
    let line = format!("max deviation after T = 5 and back {worst:.2e} (≤ 1e-6)");
    if worst <= 1e-6 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn condition_suite() -> Outcome {
    let start = Instant::now();
    let grid = default_condition_grid();
    let mut failures = Vec::new();
    let (mut existence, mut loss) = (0, 0);
    for b in catalog() {
        let r = check_phi_condition(&b.omega, &b.phi, b.mode, &grid).map_err(|e| e.to_string())?;
        let ok = match b.regime {
            Regime::Existence => {
                existence += 1;
                r.pass && r.lambda_estimate.is_finite()
            }
            Regime::Loss => {
                loss += 1;
                !r.pass && r.tail_slope > 0.0
            }
        };
        if !ok {
            failures.push(format!("{} (Λ = {:.3e}, slope {:.3e})", b.name, r.lambda_estimate, r.tail_slope));
        }
    }
    within(Duration::from_secs(5), start)?;
    if failures.is_empty() {
        Ok(format!("{existence} existence pairs pass, {loss} loss pairs fail with positive growth"))
    } else {
        Err(format!("misclassified: {}", failures.join(", ")))
    }
}

fn observed_orders(init: &SpectralState, m: &FunctionSpec, dts: &[f64]) -> Result<(f64, f64), String> {
    let (d1, d2) = psi_initial_derivatives(&init.u, &init.v, m).map_err(|e| e.to_string())?;
    let mut e1 = Vec::new();
    let mut e2 = Vec::new();
    for &dt in dts {
        let cfg = IntegratorConfig::with_tolerance(1e-13).with_dt(dt);
        let tr = evolve(init, m, &cfg, 2.0 * dt).map_err(|e| e.to_string())?;
        let p = psi_trace(&tr, &init.u).map_err(|e| e.to_string())?.psi;
        e1.push(((-3.0 * p[0] + 4.0 * p[1] - p[2]) / (2.0 * dt) - d1).abs());
        e2.push(((p[0] - 2.0 * p[1] + p[2]) / (dt * dt) - d2).abs());
    }
    let order = |e: &[f64]| (e[0] / e[1]).log2();
    Ok((order(&e1), order(&e2)))
}

fn as_coherence() -> Outcome {
    let m = FunctionSpec::affine(1.0, 1.0);
    let results: Vec<Result<(bool, f64, f64), String>> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let init = random_state(400 + seed, 16);
            let (as1, as2) = as_quantities(&init.u, &init.v, &m).map_err(|e| e.to_string())?;
            let (d1, d2) = psi_initial_derivatives(&init.u, &init.v, &m).map_err(|e| e.to_string())?;
            let exact = d1 == 2.0 * as1 && d2 == 2.0 * as2;
            let (o1, o2) = observed_orders(&init, &m, &[0.02, 0.01])?;
            Ok((exact, o1, o2))
        })
        .collect();
    let (mut all_exact, mut min1, mut min2) = (true, f64::INFINITY, f64::INFINITY);
    for r in results {
        let (exact, o1, o2) = r?;
        all_exact &= exact;
        min1 = min1.min(o1);
        min2 = min2.min(o2);
    }
    let line = format!("identities exact: {all_exact}; min observed orders {min1:.2} (≥ 1.8), {min2:.2} (≥ 0.9)");
    if all_exact && min1 >= 1.8 && min2 >= 0.9 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn round_trip_case(u0: &[f64], u1: &[f64], s_max: f64) -> Result<(f64, bool, bool), String> {
    let sp = spectrum(u0.len());
    let u0 = SpectralVector::new(sp.clone(), u0.to_vec()).unwrap();
    let u1 = SpectralVector::new(sp, u1.to_vec()).unwrap();
    let m = FunctionSpec::affine(1.0, 1.0);
    let cfg = tight();
    let err = |e: kirchhoff_core::Error| e.to_string();
    let (d1, d2) = psi_initial_derivatives(&u0, &u1, &m).map_err(err)?;
    let curve = solve_trajectory_system(&u0, &u1, &m, s_max, &cfg).map_err(err)?;
    let travel = SpeedTable::from_curve(&curve).map_err(err)?.travel_time().ok_or("no travel time")?;
    let t_end = 0.999 * travel;
    let psi = solve_parametrization(&curve, t_end, &cfg).map_err(err)?;
    let tr = evolve(&SpectralState::new(0.0, u0.clone(), u1).unwrap(), &m, &cfg, t_end).map_err(err)?;
    let check = reparametrization_check(&tr, &curve, &u0).map_err(err)?;
    let rt = round_trip_deviation(&tr, &curve, &psi).map_err(err)?;
    let first = if d1.abs() > 2e-10 { d1 } else { d2 };
    let coherent = psi.f.iter().skip(1).all(|f| f.signum() == first.signum());
    let deviation = check.max_deviation.max(rt.state_deviation).max(rt.psi_deviation);
    Ok((deviation, d1.abs() > 2e-10, coherent))
}

fn round_trip() -> Outcome {
    let (dev_a, first_a, coh_a) = round_trip_case(&[0.5, 0.2, 0.0, 0.1], &[0.3, -0.4, 0.2, 0.0], 0.05)?;
    let (dev_b, first_b, coh_b) = round_trip_case(&[0.5, 0.2, 0.0, 0.1], &[0.0; 4], 0.05)?;
    let line = format!("ψ'(0) ≠ 0 branch {dev_a:.2e}, ψ'(0) = 0 branch {dev_b:.2e} (≤ 1e-5)");
    if first_a && !first_b && coh_a && coh_b && dev_a <= 1e-5 && dev_b <= 1e-5 {
        Ok(line)
    } else {
        Err(format!("{line}; branches {first_a}/{first_b}, sign coherent {coh_a}/{coh_b}"))
    }
}

fn interleaved(rho_hat: &[f64], rho_bar: &[f64]) -> bool {
    let mut merged: Vec<f64> = Vec::new();
    for i in 0..rho_hat.len().max(rho_bar.len()) {
        merged.extend(rho_hat.get(i));
        merged.extend(rho_bar.get(i));
    }
    rho_hat.len().abs_diff(rho_bar.len()) <= 1 && merged.windows(2).all(|w| w[0] < w[1])
}

fn sum_property() -> Outcome {
    let start = Instant::now();
    let sp = spectrum(64);
    let phi = FunctionSpec::power(1.0);
    let mut bands = Vec::new();
    for (gamma, q) in [(1.0, 1.0), (1.0, 2.0), (0.1, 2.0)] {
        let u = SpectralVector::from_fn(sp.clone(), |_, l| (-gamma * l.powf(q)).exp());
        for beta in [2.0, 3.0] {
            let tag = format!("(γ, q, β) = ({gamma}, {q}, {beta})");
            let d = sum_decompose(&u, &u, &phi, 0.25, beta, &DecomposeOptions::default())
                .map_err(|e| format!("{tag}: {e}"))?;
            let (r0, r1) = d.reconstruct();
            if r0 != u.components() || r1 != u.components() {
                return Err(format!("{tag}: reconstruction not exact"));
            }
            if !d.supports_disjoint() || !interleaved(&d.rho_hat, &d.rho_bar) {
                return Err(format!("{tag}: supports or ρ sequences do not separate"));
            }
            let reports = d.membership(&phi, 0.25, beta).map_err(|e| e.to_string())?;
            if let Some(i) = reports.iter().position(|r| !r.member) {
                return Err(format!("{tag}: part {i} fails membership"));
            }
            bands.push(d.bands.len());
        }
    }
    within(Duration::from_secs(5), start)?;
    Ok(format!("6 decompositions exact and members; band counts {bands:?}"))
}

fn continuous_dependence() -> Outcome {
    let init = random_state(500, 16);
    let limit = DependenceProblem {
        m: FunctionSpec::constant(1.0),
        u0: init.u.clone(),
        u1: init.v.clone(),
    };
    let ns: Vec<f64> = (2..=8).map(|j| f64::from(1u32 << j)).collect();
    let problems: Vec<DependenceProblem> = ns
        .iter()
        .map(|n| DependenceProblem {
            m: FunctionSpec::constant(1.0 + 1.0 / n),
            ..limit.clone()
        })
        .collect();
    let report = continuous_dependence_study(&problems, &limit, None, &tight(), 1.0).map_err(|e| e.to_string())?;
    let ys: Vec<f64> = report.rows.iter().map(|r| r.deviation).collect();
    let slope = fit_rate(&ns, &ys).ok_or("rate could not be fitted")?;
    let line = format!("fitted slope {slope:.4} over n = 4..256 (in [-1.2, -0.8])");
    if (-1.2..=-0.8).contains(&slope) {
        Ok(line)
    } else {
        Err(line)
    }
}

fn artifact_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut configs: Vec<PathBuf> = std::fs::read_dir(&root)
        .map_err(|e| format!("{}: {e}", root.display()))?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    configs.sort();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let registry = TaskRegistry::builtin();
    let mut files = 0;
    for cfg in &configs {
        let stem = cfg.file_stem().unwrap().to_string_lossy().into_owned();
        let mut runs = Vec::new();
        for rep in 0..2 {
            let dir = tmp.path().join(format!("{stem}-{rep}"));
            let overrides = Overrides {
                out_dir: Some(dir.clone()),
                ..Overrides::default()
            };
            let manifest = run_scenario(cfg, &overrides, &registry).map_err(|e| format!("{stem}: {e}"))?;
            runs.push((manifest, artifact_bytes(&dir)));
        }
        if runs[0].1 != runs[1].1 {
            return Err(format!("{stem}: artifacts differ between runs"));
        }
        if runs[0].0.artifacts != runs[1].0.artifacts {
            return Err(format!("{stem}: manifest hashes differ"));
        }
        files += runs[0].1.len();
    }
    Ok(format!("{} scenarios, {files} artifacts byte-identical across reruns", configs.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("linear oracle", linear_oracle),
        ("Hamiltonian conservation", hamiltonian_conservation),
        ("Pohozaev invariant", pohozaev),
        ("time reversibility", reversibility),
        ("condition tables", condition_suite),
        ("AS1/AS2 coherence", as_coherence),
        ("trajectory round trip", round_trip),
        ("Sum Property", sum_property),
        ("continuous dependence", continuous_dependence),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{:>2}] {name}: {detail} ({secs:.2}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{:>2}] {name}: {detail} ({secs:.2}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
