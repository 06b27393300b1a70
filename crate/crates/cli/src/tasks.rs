//! Built-in tasks. Each one reads its parameters from the scenario's
//! `[params]` table (unknown keys are rejected) and writes its artifacts.

use kirchhoff_core::analysis::{
    classify_degeneracy, continuous_dependence_study, fit_rate, reachable_sigma_grid, scale_norm_trace,
    uniqueness_condition, ContinuityCheck, Degeneracy, DependenceProblem, ScaleTraceConfig,
    DEFAULT_HP_MAIN_TOL,
};
use kirchhoff_core::conditions::{check_phi_condition, log_grid, ConditionReport};
use kirchhoff_core::dynamics::{
    coefficient_trace, evolve, hamiltonian, higher_order_energy, pohozaev_invariant, EnergyRecord,
    IntegratorMeta, RunStatus, SpectralState, Trajectory,
};
use kirchhoff_core::modulus::{verify_modulus_axioms, ModulusReport};
use kirchhoff_core::presets::Regime;
use kirchhoff_core::spectral_gap::{sum_decompose, DecomposeOptions, GMReport};
use kirchhoff_core::trajectory::{
    psi_initial_derivatives, psi_trace, reparametrization_check, round_trip_deviation, solve_parametrization,
    solve_trajectory_system, ReparamReport, RoundTripReport, SpeedTable,
};
use kirchhoff_core::{FunctionSpec, HyperbolicMode, SpectralVector};
use serde::{Deserialize, Serialize};

use crate::artifacts::{indexed_columns, ArtifactSink};
use crate::error::{CliError, CliResult};
use crate::registry::{Check, Task};
use crate::scenario::Resolved;

pub fn builtin() -> Vec<Box<dyn Task>> {
    vec![
        Box::new(Simulate),
        Box::new(Norms),
        Box::new(Conditions),
        Box::new(Uniqueness),
        Box::new(Invariants),
        Box::new(Decompose),
        Box::new(Reparametrize),
        Box::new(Dependence),
    ]
}

fn core_err(task: &str) -> impl Fn(kirchhoff_core::Error) -> CliError + '_ {
    move |source| CliError::Task {
        task: task.to_string(),
        source,
    }
}

fn initial_state(sc: &Resolved) -> SpectralState {
    SpectralState::new(0.0, sc.u0.clone(), sc.u1.clone()).expect("vectors share the scenario spectrum")
}

fn positive(field: &str, x: f64) -> CliResult<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::validation(format!("params.{field}"), "must be positive and finite"))
    }
}

fn default_t_end() -> f64 {
    10.0
}

fn state_columns(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(indexed_columns("u", n));
    h.extend(indexed_columns("v", n));
    h
}

fn state_row(s: &SpectralState) -> Vec<f64> {
    let mut row = vec![s.t];
    row.extend_from_slice(s.u.components());
    row.extend_from_slice(s.v.components());
    row
}

#[derive(Debug, Serialize)]
struct TrajectorySummary<'a> {
    samples: usize,
    t_start: f64,
    t_end: f64,
    status: &'a RunStatus,
    integrator: &'a IntegratorMeta,
    degenerate_intervals: &'a [(f64, f64)],
    hamiltonian_initial: Option<f64>,
    hamiltonian_max_relative_drift: Option<f64>,
    coefficient_period: Option<f64>,
    coefficient_modulus_profile: Vec<(f64, f64)>,
}

fn run_evolve(task: &str, sc: &Resolved, m: &FunctionSpec, t_end: f64) -> CliResult<Trajectory> {
    evolve(&initial_state(sc), m, &sc.integrator, t_end).map_err(core_err(task))
}

pub struct Simulate;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateParams {
    #[serde(default = "default_t_end")]
    t_end: f64,
    #[serde(default = "default_drift_tol")]
    drift_tolerance: f64,
}

fn default_drift_tol() -> f64 {
    1e-7
}

impl Task for Simulate {
    fn name(&self) -> &'static str {
        "simulate"
    }

    fn summary(&self) -> &'static str {
        "integrate the truncated equation; trajectory with Hamiltonian drift"
    }

    fn validate(&self, sc: &Resolved) -> CliResult<()> {
        sc.require_m()?;
        let p: SimulateParams = sc.params()?;
        positive("t_end", p.t_end)
    }

    fn run(&self, sc: &Resolved, out: &mut ArtifactSink) -> CliResult<Vec<Check>> {
        let m = sc.require_m()?;
        let p: SimulateParams = sc.params()?;
        let tr = run_evolve(self.name(), sc, m, p.t_end)?;
        let n = sc.spectrum.len();
        let mut header = state_columns(n);
        let energy = tr.hamiltonian.as_ref();
        if energy.is_some() {
            header.push("hamiltonian".into());
            header.push("drift".into());
        }
        let drift = energy.map(EnergyRecord::relative_drift);
        let rows = tr.states().iter().enumerate().map(|(i, s)| {
            let mut row = state_row(s);
            if let (Some(e), Some(d)) = (energy, &drift) {
                row.push(e.values[i]);
                row.push(d[i]);
            }
            row
        });
        out.write_csv("trajectory.csv", &header, rows)?;

        let trace = coefficient_trace(&tr, m, None);
        let summary = TrajectorySummary {
            samples: tr.len(),
            t_start: tr.initial().t,
            t_end: tr.last().t,
            status: &tr.status,
            integrator: &tr.meta,
            degenerate_intervals: &tr.degenerate_intervals,
            hamiltonian_initial: energy.map(|e| e.initial),
            hamiltonian_max_relative_drift: energy.map(|e| e.max_relative_drift),
            coefficient_period: trace.period,
            coefficient_modulus_profile: trace.modulus_profile,
        };
        out.write_json("trajectory_summary.json", &summary)?;

        let mut checks = vec![Check::flag("completed", tr.is_complete())];
        if let Some(e) = energy {
            checks.push(Check::at_most("hamiltonian_drift", e.max_relative_drift, p.drift_tolerance));
        }
        Ok(checks)
    }
}

pub struct Norms;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NormsParams {
    #[serde(default = "default_one")]
    t_end: f64,
    #[serde(default = "default_one")]
    r0: f64,
    #[serde(default, rename = "R")]
    shrink_rate: f64,
    #[serde(default)]
    alpha: f64,
}

fn default_one() -> f64 {
    1.0
}

impl Task for Norms {
    fn name(&self) -> &'static str {
        "norms"
    }

    fn summary(&self) -> &'static str {
        "generalized Gevrey norms along the shrinking radius r0 − R t"
    }

    fn validate(&self, sc: &Resolved) -> CliResult<()> {
        sc.require_m()?;
        sc.require_phi()?;
        let p: NormsParams = sc.params()?;
        positive("t_end", p.t_end)?;
        positive("r0", p.r0)?;
        if !(p.shrink_rate >= 0.0 && p.alpha >= 0.0) {
            return Err(CliError::validation("params", "R and alpha must be nonnegative"));
        }
        if p.r0 - p.shrink_rate * p.t_end <= 0.0 {
            return Err(CliError::validation("params.R", "radius r0 − R·t_end must stay positive"));
        }
        Ok(())
    }

    fn run(&self, sc: &Resolved, out: &mut ArtifactSink) -> CliResult<Vec<Check>> {
        self.validate(sc)?;
        let p: NormsParams = sc.params()?;
        let tr = run_evolve(self.name(), sc, sc.require_m()?, p.t_end)?;
        let cfg = ScaleTraceConfig {
            phi: sc.require_phi()?.clone(),
            r0: p.r0,
            shrink_rate: p.shrink_rate,
            alpha: p.alpha,
        };
        let trace = scale_norm_trace(&tr, &cfg).map_err(core_err(self.name()))?;
        let header: Vec<String> = ["t", "radius", "u_norm", "v_norm"].map(String::from).to_vec();
        out.write_csv(
            "norm_trace.csv",
            &header,
            trace.iter().map(|r| vec![r.t, r.radius, r.u_norm, r.v_norm]),
        )?;
        Ok(vec![
            Check::flag("completed", tr.is_complete()),
            Check::flag("finite_norms", trace.iter().all(|r| r.u_norm.is_finite() && r.v_norm.is_finite())),
        ])
    }
}

pub struct Conditions;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConditionParams {
    #[serde(default = "default_grid_lo")]
    grid_low: f64,
    #[serde(default = "default_grid_hi")]
    grid_high: f64,
    #[serde(default = "default_per_decade")]
    points_per_decade: usize,
    /// expected verdict; defaults to the preset's regime
    #[serde(default)]
    expect_pass: Option<bool>,
}

fn default_grid_lo() -> f64 {
    1e-6
}

fn default_grid_hi() -> f64 {
    1e6
}

fn default_per_decade() -> usize {
    512
}

#[derive(Debug, Serialize)]
struct ConditionArtifact<'a> {
    mode: HyperbolicMode,
    omega: &'a FunctionSpec,
    phi: &'a FunctionSpec,
    preset: Option<&'a str>,
    report: ConditionReport,
    expected_pass: Option<bool>,
    modulus_axioms: ModulusReport,
}

impl Task for Conditions {
    fn name(&self) -> &'static str {
        "conditions"
    }

    fn summary(&self) -> &'static str {
        "check the compatibility condition between ω and φ on a log grid"
    }

    fn validate(&self, sc: &Resolved) -> CliResult<()> {
        sc.require_omega()?;
        sc.require_phi()?;
        sc.require_mode()?;
        let p: ConditionParams = sc.params()?;
        log_grid(p.grid_low, p.grid_high, p.points_per_decade)
            .map(|_| ())
            .map_err(|e| CliError::validation("params", e.to_string()))
    }

    fn run(&self, sc: &Resolved, out: &mut ArtifactSink) -> CliResult<Vec<Check>> {
        self.validate(sc)?;
        let p: ConditionParams = sc.params()?;
        let (omega, phi, mode) = (sc.require_omega()?, sc.require_phi()?, sc.require_mode()?);
        let grid = log_grid(p.grid_low, p.grid_high, p.points_per_decade).map_err(core_err(self.name()))?;
        let report = check_phi_condition(omega, phi, mode, &grid).map_err(core_err(self.name()))?;
        let axiom_grid: Vec<f64> = (0..=200).map(|i| 4.0 * i as f64 / 200.0).collect();
        let modulus_axioms = verify_modulus_axioms(omega, &axiom_grid).map_err(core_err(self.name()))?;
        let expected = p
            .expect_pass
            .or_else(|| sc.preset.as_ref().map(|b| b.regime == Regime::Existence));
        let check = match expected {
            Some(e) => Check::flag("condition_verdict_as_expected", report.pass == e),
            None => Check::flag("condition_pass", report.pass),
        };
        out.write_json(
            "condition_report.json",
            &ConditionArtifact {
                mode,
                omega,
                phi,
                preset: sc.preset.as_ref().map(|b| b.name.as_str()),
                report,
                expected_pass: expected,
                modulus_axioms,
            },
        )?;
        Ok(vec![check])
    }
}

pub struct Uniqueness;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UniquenessParams {
    #[serde(default = "default_hp_tol")]
    tolerance: f64,
    #[serde(default = "default_reachable_points")]
    reachable_points: usize,
}

fn default_hp_tol() -> f64 {
    DEFAULT_HP_MAIN_TOL
}

fn default_reachable_points() -> usize {
    256
}

#[derive(Debug, Serialize)]
struct UniquenessArtifact {
    as1: f64,
    as2: f64,
    hp_main_holds: bool,
    tolerance: f64,
    psi_prime_0: f64,
    psi_second_0: f64,
    sigma0: f64,
    degeneracy: Degeneracy,
    reachable_sigma_max: f64,
}

impl Task for Uniqueness {
    fn name(&self) -> &'static str {
        "uniqueness"
    }

    fn summary(&self) -> &'static str {
        "initial-data quantities deciding uniqueness, and the degeneracy class"
    }

    fn validate(&self, sc: &Resolved) -> CliResult<()> {
        sc.require_m()?;
        let p: UniquenessParams = sc.params()?;
        if !(p.tolerance >= 0.0) || p.reachable_points < 2 {
            return Err(CliError::validation("params", "tolerance ≥ 0 and reachable_points ≥ 2 required"));
        }
        Ok(())
    }

    fn run(&self, sc: &Resolved, out: &mut ArtifactSink) -> CliResult<Vec<Check>> {
        self.validate(sc)?;
        let p: UniquenessParams = sc.params()?;
        let m = sc.require_m()?;
        let err = core_err(self.name());
        let rep = uniqueness_condition(&sc.u0, &sc.u1, m, p.tolerance).map_err(&err)?;
        let (d1, d2) = psi_initial_derivatives(&sc.u0, &sc.u1, m).map_err(&err)?;
        let grid = reachable_sigma_grid(&initial_state(sc), m, p.reachable_points).map_err(&err)?;
        let artifact = UniquenessArtifact {
            as1: rep.as1,
            as2: rep.as2,
            hp_main_holds: rep.hp_main_holds,
            tolerance: rep.tolerance,
            psi_prime_0: d1,
            psi_second_0: d2,
            sigma0: sc.u0.energy_sigma(),
            degeneracy: classify_degeneracy(m, &sc.u0, &grid),
            reachable_sigma_max: grid[grid.len() - 1],
        };
        out.write_json("uniqueness_report.json", &artifact)?;
        Ok(vec![
            Check::flag("psi_derivatives_match", d1 == 2.0 * rep.as1 && d2 == 2.0 * rep.as2),
            Check::flag("hp_main", rep.hp_main_holds),
        ])
    }
}

pub struct Invariants;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InvariantParams {
    #[serde(default = "default_t_end")]
    t_end: f64,
    #[serde(default)]
    pohozaev_a: Option<f64>,
    #[serde(default)]
    pohozaev_b: Option<f64>,
    #[serde(default = "default_drift_tol")]
    hamiltonian_tolerance: f64,
    #[serde(default = "default_pohozaev_tol")]
    pohozaev_tolerance: f64,
}

fn default_pohozaev_tol() -> f64 {
    1e-6
}

#[derive(Debug, Serialize)]
struct InvariantArtifact {
    hamiltonian_max_relative_drift: f64,
    higher_order_energy_max_relative_drift: f64,
    pohozaev: Option<PohozaevSummary>,
}

#[derive(Debug, Serialize)]
struct PohozaevSummary {
    a: f64,
    b: f64,
    conserved_expected: bool,
    max_relative_drift: f64,
}

impl InvariantParams {
    fn pohozaev(&self, m: &FunctionSpec) -> Option<(f64, f64, bool)> {
        match (self.pohozaev_a, self.pohozaev_b, m) {
            (Some(a), Some(b), FunctionSpec::Pohozaev { a: ma, b: mb }) => Some((a, b, a == *ma && b == *mb)),
            (Some(a), Some(b), _) => Some((a, b, false)),
            (None, None, FunctionSpec::Pohozaev { a, b }) => Some((*a, *b, true)),
            _ => None,
        }
    }
}

impl Task for Invariants {
    fn name(&self) -> &'static str {
        "invariants"
    }

    fn summary(&self) -> &'static str {
        "Hamiltonian, higher-order energy and Pohozaev quantity along a run"
    }

    fn validate(&self, sc: &Resolved) -> CliResult<()> {
        sc.require_m()?;
        let p: InvariantParams = sc.params()?;
        positive("t_end", p.t_end)?;
        if p.pohozaev_a.is_some() != p.pohozaev_b.is_some() {
            return Err(CliError::validation("params.pohozaev_b", "give both pohozaev_a and pohozaev_b"));
        }
        Ok(())
    }

    fn run(&self, sc: &Resolved, out: &mut ArtifactSink) -> CliResult<Vec<Check>> {
        self.validate(sc)?;
        let p: InvariantParams = sc.params()?;
        let m = sc.require_m()?;
        let err = core_err(self.name());
        let tr = run_evolve(self.name(), sc, m, p.t_end)?;
        let h = EnergyRecord::from_values(
            tr.states().iter().map(|s| hamiltonian(s, m)).collect::<Result<_, _>>().map_err(&err)?,
        );
        let e = EnergyRecord::from_values(tr.states().iter().map(higher_order_energy).collect());
        let poh = match p.pohozaev(m) {
            Some((a, b, expected)) => Some((
                a,
                b,
                expected,
                EnergyRecord::from_values(
                    tr.states()
                        .iter()
                        .map(|s| pohozaev_invariant(s, a, b))
                        .collect::<Result<_, _>>()
                        .map_err(&err)?,
                ),
            )),
            None => None,
        };
        let mut header: Vec<String> = ["t", "hamiltonian", "higher_order_energy"].map(String::from).to_vec();
        if poh.is_some() {
            header.push("pohozaev".into());
        }
        let rows = tr.states().iter().enumerate().map(|(i, s)| {
            let mut row = vec![s.t, h.values[i], e.values[i]];
            if let Some((_, _, _, rec)) = &poh {
                row.push(rec.values[i]);
            }
            row
        });
        out.write_csv("invariants.csv", &header, rows)?;
        out.write_json(
            "invariants.json",
            &InvariantArtifact {
                hamiltonian_max_relative_drift: h.max_relative_drift,
                higher_order_energy_max_relative_drift: e.max_relative_drift,
                pohozaev: poh.as_ref().map(|(a, b, exp, rec)| PohozaevSummary {
                    a: *a,
                    b: *b,
                    conserved_expected: *exp,
                    max_relative_drift: rec.max_relative_drift,
                }),
            },
        )?;
        let mut checks = vec![
            Check::flag("completed", tr.is_complete()),
            Check::at_most("hamiltonian_drift", h.max_relative_drift, p.hamiltonian_tolerance),
        ];
        if let Some((_, _, true, rec)) = &poh {
            checks.push(Check::at_most("pohozaev_drift", rec.max_relative_drift, p.pohozaev_tolerance));
        }
        Ok(checks)
    }
}

pub struct Decompose;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecomposeParams {
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default = "default_beta")]
    beta: f64,
    #[serde(default = "default_one")]
    r_probe: f64,
    #[serde(default = "default_one")]
    s0: f64,
    #[serde(default = "default_max_bands")]
    max_bands: usize,
}

fn default_alpha() -> f64 {
    0.25
}

fn default_beta() -> f64 {
    2.0
}

fn default_max_bands() -> usize {
    256
}

#[derive(Debug, Serialize)]
struct MembershipEntry<'a> {
    part: &'a str,
    exponent: f64,
    report: GMReport,
}

#[derive(Debug, Serialize)]
struct DecompositionArtifact<'a> {
    alpha: f64,
    beta: f64,
    breakpoints: &'a [f64],
    bands: &'a [(f64, f64)],
    rho_bar: &'a [f64],
    rho_hat: &'a [f64],
    reconstruction_exact: bool,
    supports_disjoint: bool,
    membership: Vec<MembershipEntry<'a>>,
}

impl Task for Decompose {
    fn name(&self) -> &'static str {
        "decompose"
    }

    fn summary(&self) -> &'static str {
        "split the data into two spectral-gap parts and test their tail conditions"
    }

    fn validate(&self, sc: &Resolved) -> CliResult<()> {
        sc.require_phi()?;
        let p: DecomposeParams = sc.params()?;
        positive("r_probe", p.r_probe)?;
        positive("s0", p.s0)?;
        if !(p.alpha >= 0.0 && p.beta >= 0.0) {
            return Err(CliError::validation("params", "alpha and beta must be nonnegative"));
        }
        Ok(())
    }

    fn run(&self, sc: &Resolved, out: &mut ArtifactSink) -> CliResult<Vec<Check>> {
        self.validate(sc)?;
        let p: DecomposeParams = sc.params()?;
        let phi = sc.require_phi()?;
        let err = core_err(self.name());
        let opts = DecomposeOptions {
            r_probe: p.r_probe,
            s0: p.s0,
            max_bands: p.max_bands,
        };
        let d = sum_decompose(&sc.u0, &sc.u1, phi, p.alpha, p.beta, &opts).map_err(&err)?;
        let (r0, r1) = d.reconstruct();
        let exact = r0 == sc.u0.components() && r1 == sc.u1.components();
        let disjoint = d.supports_disjoint();
        let reports = d.membership(phi, p.alpha, p.beta).map_err(&err)?;
        let labels = [
            ("bar_u0", p.alpha + 0.5),
            ("bar_u1", p.alpha),
            ("hat_u0", p.alpha + 0.5),
            ("hat_u1", p.alpha),
        ];
        let mut checks = vec![
            Check::flag("reconstruction_exact", exact),
            Check::flag("supports_disjoint", disjoint),
        ];
        for ((label, _), r) in labels.iter().zip(&reports) {
            checks.push(Check::flag(&format!("member_{label}"), r.member));
        }
        let membership = labels
            .iter()
            .zip(reports)
            .map(|((part, exponent), report)| MembershipEntry {
                part,
                exponent: *exponent,
                report,
            })
            .collect();
        out.write_json(
            "decomposition.json",
            &DecompositionArtifact {
                alpha: p.alpha,
                beta: p.beta,
                breakpoints: &d.breakpoints,
                bands: &d.bands,
                rho_bar: &d.rho_bar,
                rho_hat: &d.rho_hat,
                reconstruction_exact: exact,
                supports_disjoint: disjoint,
                membership,
            },
        )?;
        let header: Vec<String> = ["k", "lambda", "u0", "u1", "bar_u0", "bar_u1", "hat_u0", "hat_u1"]
            .map(String::from)
            .to_vec();
        let lambdas = sc.spectrum.lambdas();
        let rows = (0..lambdas.len()).map(|k| {
            vec![
                (k + 1) as f64,
                lambdas[k],
                sc.u0.components()[k],
                sc.u1.components()[k],
                d.bar_u0.components()[k],
                d.bar_u1.components()[k],
                d.hat_u0.components()[k],
                d.hat_u1.components()[k],
            ]
        });
        out.write_csv("decomposition_parts.csv", &header, rows)?;
        Ok(checks)
    }
}

pub struct Reparametrize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReparamParams {
    s_max: f64,
    #[serde(default)]
    t_end: Option<f64>,
    #[serde(default = "default_reparam_tol")]
    tolerance: f64,
}

fn default_reparam_tol() -> f64 {
    1e-5
}

#[derive(Debug, Serialize)]
struct ReparamArtifact {
    direction: f64,
    bootstrap_t: Option<f64>,
    s_regular_start: f64,
    s_end: f64,
    t_end: f64,
    check: ReparamReport,
    round_trip: RoundTripReport,
}

impl Task for Reparametrize {
    fn name(&self) -> &'static str {
        "reparametrize"
    }

    fn summary(&self) -> &'static str {
        "solve the (z, w) system in s = ψ(t) and reconstruct the direct run"
    }

    fn validate(&self, sc: &Resolved) -> CliResult<()> {
        sc.require_m()?;
        let p: ReparamParams = sc.params()?;
        positive("s_max", p.s_max)?;
        if let Some(t) = p.t_end {
            positive("t_end", t)?;
        }
        Ok(())
    }

    fn run(&self, sc: &Resolved, out: &mut ArtifactSink) -> CliResult<Vec<Check>> {
        self.validate(sc)?;
        let p: ReparamParams = sc.params()?;
        let m = sc.require_m()?;
        let err = core_err(self.name());
        let curve = solve_trajectory_system(&sc.u0, &sc.u1, m, p.s_max, &sc.integrator).map_err(&err)?;
        let table = SpeedTable::from_curve(&curve).map_err(&err)?;
        let t_end = match p.t_end {
            Some(t) => t,
            None => 0.999 * table.travel_time().ok_or_else(|| err(kirchhoff_core::Error::Quadrature { sigma: p.s_max }))?,
        };
        let psi = solve_parametrization(&curve, t_end, &sc.integrator).map_err(&err)?;
        let tr = run_evolve(self.name(), sc, m, t_end)?;
        let check = reparametrization_check(&tr, &curve, &sc.u0).map_err(&err)?;
        let round_trip = round_trip_deviation(&tr, &curve, &psi).map_err(&err)?;
        let direct = psi_trace(&tr, &sc.u0).map_err(&err)?;

        let n = sc.spectrum.len();
        let mut header = vec!["s".to_string()];
        header.extend(indexed_columns("z", n));
        header.extend(indexed_columns("w", n));
        let rows = (0..curve.len()).map(|i| {
            let mut row = vec![curve.s[i]];
            row.extend_from_slice(curve.z[i].components());
            row.extend_from_slice(curve.w[i].components());
            row
        });
        out.write_csv("s_curve.csv", &header, rows)?;
        let header: Vec<String> = ["t", "psi", "F", "psi_direct"].map(String::from).to_vec();
        out.write_csv(
            "psi_trace.csv",
            &header,
            (0..psi.t.len()).map(|i| vec![psi.t[i], psi.psi[i], psi.f[i], direct.psi[i]]),
        )?;
        out.write_json(
            "reparametrization.json",
            &ReparamArtifact {
                direction: curve.direction,
                bootstrap_t: curve.bootstrap_t,
                s_regular_start: curve.s_regular_start(),
                s_end: curve.s_end(),
                t_end,
                check,
                round_trip,
            },
        )?;
        Ok(vec![
            Check::at_most("curve_vs_direct", check.max_deviation, p.tolerance),
            Check::at_most("round_trip_state", round_trip.state_deviation, p.tolerance),
            Check::at_most("round_trip_psi", round_trip.psi_deviation, p.tolerance),
        ])
    }
}

pub struct Dependence;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
enum Perturbation {
    /// `m_n = m + 1/n`
    Nonlinearity,
    /// `u0_n = u0 + e_1/n`
    Data,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DependenceParams {
    #[serde(default = "default_one")]
    t_end: f64,
    #[serde(default = "default_ns")]
    ns: Vec<u32>,
    #[serde(default = "default_perturbation")]
    perturb: Perturbation,
    #[serde(default)]
    slope_range: Option<[f64; 2]>,
}

fn default_ns() -> Vec<u32> {
    vec![4, 8, 16, 32, 64, 128, 256]
}

fn default_perturbation() -> Perturbation {
    Perturbation::Nonlinearity
}

#[derive(Debug, Serialize)]
struct DependenceArtifact {
    perturb: Perturbation,
    ns: Vec<u32>,
    rows: Vec<kirchhoff_core::analysis::DependenceRow>,
    continuity_constant: Option<f64>,
    fitted_slope: Option<f64>,
}

impl Task for Dependence {
    fn name(&self) -> &'static str {
        "dependence"
    }

    fn summary(&self) -> &'static str {
        "distance between perturbed and limit solutions, with fitted rate in n"
    }

    fn validate(&self, sc: &Resolved) -> CliResult<()> {
        sc.require_m()?;
        let p: DependenceParams = sc.params()?;
        positive("t_end", p.t_end)?;
        if p.ns.len() < 2 || p.ns.contains(&0) {
            return Err(CliError::validation("params.ns", "need at least two positive n"));
        }
        Ok(())
    }

    fn run(&self, sc: &Resolved, out: &mut ArtifactSink) -> CliResult<Vec<Check>> {
        self.validate(sc)?;
        let p: DependenceParams = sc.params()?;
        let m = sc.require_m()?;
        let limit = DependenceProblem {
            m: m.clone(),
            u0: sc.u0.clone(),
            u1: sc.u1.clone(),
        };
        let e1 = SpectralVector::unit(sc.spectrum.clone(), 0).expect("spectrum is nonempty");
        let problems: Vec<DependenceProblem> = p
            .ns
            .iter()
            .map(|&n| {
                let h = 1.0 / f64::from(n);
                match p.perturb {
                    Perturbation::Nonlinearity => DependenceProblem {
                        m: m.clone().shifted(h),
                        ..limit.clone()
                    },
                    Perturbation::Data => DependenceProblem {
                        u0: SpectralVector::from_fn(sc.spectrum.clone(), |k, _| {
                            sc.u0.components()[k] + h * e1.components()[k]
                        }),
                        ..limit.clone()
                    },
                }
            })
            .collect();
        let check = match &sc.omega {
            Some(omega) => {
                let top = 2.0 * (reachable_sigma_grid(&initial_state(sc), m, 2)
                    .map_err(core_err(self.name()))?
                    .last()
                    .copied()
                    .unwrap_or(1.0))
                .max(1.0);
                Some(ContinuityCheck {
                    omega: omega.clone(),
                    grid: (0..=64).map(|i| top * f64::from(i) / 64.0).collect(),
                })
            }
            None => None,
        };
        let report = continuous_dependence_study(&problems, &limit, check.as_ref(), &sc.integrator, p.t_end)
            .map_err(core_err(self.name()))?;
        let xs: Vec<f64> = p.ns.iter().map(|&n| f64::from(n)).collect();
        let ys: Vec<f64> = report.rows.iter().map(|r| r.deviation).collect();
        let slope = fit_rate(&xs, &ys);
        let mut checks = vec![Check::flag("rate_fitted", slope.is_some())];
        if let (Some([lo, hi]), Some(s)) = (p.slope_range, slope) {
            checks.push(Check {
                name: "slope_in_range".into(),
                passed: s >= lo && s <= hi,
                value: Some(s),
                threshold: None,
            });
        }
        out.write_json(
            "dependence.json",
            &DependenceArtifact {
                perturb: p.perturb,
                ns: p.ns,
                rows: report.rows,
                continuity_constant: report.continuity_constant,
                fitted_slope: slope,
            },
        )?;
        Ok(checks)
    }
}
