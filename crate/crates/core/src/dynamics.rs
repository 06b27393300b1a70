//! Time evolution of the Galerkin-truncated Kirchhoff system and its
//! linearization, together with the energies evaluated along trajectories.
//!
//! The state is `(u_1..u_N, v_1..v_N)` with `v = u'`, and
//!
//! ```text
//! u_k'' = −m(σ) λ_k² u_k,   σ = Σ_j λ_j² u_j²
//! ```
//!
//! Modes interact only through the scalar σ, so a mode with zero data stays
//! exactly zero.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::FunctionSpec;
use crate::ode::{self, Control, OdeSystem, SolverConfig, StepStats, Termination};
use crate::quadrature;
use crate::spectrum::{weighted_dot, weighted_square, SpectralVector, Spectrum};
use crate::summation::NeumaierSum;

/// States whose max-norm exceeds this are treated as escaping.
pub const BLOW_UP_THRESHOLD: f64 = 1.0e12;
/// `c(t)` below this counts as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1.0e-12;
pub const DEFAULT_SAMPLES: usize = 1000;
const ANTIDERIVATIVE_TOL: f64 = 1.0e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub t: f64,
    pub u: SpectralVector,
    pub v: SpectralVector,
}

impl SpectralState {
    pub fn new(t: f64, u: SpectralVector, v: SpectralVector) -> Result<Self> {
        u.ensure_shared(&v)?;
        if !t.is_finite() {
            return Err(Error::InvalidArgument("state time must be finite".into()));
        }
        Ok(SpectralState { t, u, v })
    }

    pub fn rest(spectrum: Arc<Spectrum>, t: f64) -> Self {
        SpectralState {
            t,
            u: SpectralVector::zeros(spectrum.clone()),
            v: SpectralVector::zeros(spectrum),
        }
    }

    pub fn spectrum(&self) -> &Arc<Spectrum> {
        self.u.spectrum()
    }

    /// `|A^{1/2} u|²`
    pub fn sigma(&self) -> f64 {
        self.u.energy_sigma()
    }

    /// Same state with the velocity reversed.
    pub fn with_reversed_velocity(&self) -> Self {
        SpectralState {
            t: self.t,
            u: self.u.clone(),
            v: self.v.scaled(-1.0),
        }
    }

    fn packed(&self) -> Vec<f64> {
        let mut y = self.u.components().to_vec();
        y.extend_from_slice(self.v.components());
        y
    }

    fn unpack(spectrum: &Arc<Spectrum>, t: f64, y: &[f64]) -> Self {
        let n = spectrum.len();
        SpectralState {
            t,
            u: SpectralVector::new(spectrum.clone(), y[..n].to_vec()).expect("length n"),
            v: SpectralVector::new(spectrum.clone(), y[n..].to_vec()).expect("length n"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// sample spacing; `None` means span / 1000
    pub dense_output_dt: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            max_step: f64::INFINITY,
            dense_output_dt: None,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerance(tol: f64) -> Self {
        IntegratorConfig {
            rel_tol: tol,
            abs_tol: tol,
            ..Default::default()
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dense_output_dt = Some(dt);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidArgument("max_step must be positive".into()));
        }
        if let Some(dt) = self.dense_output_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidArgument("dense_output_dt must be positive".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn solver(&self) -> SolverConfig {
        SolverConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            ..SolverConfig::default()
        }
    }

    /// Sample times after `t0` up to and including `t1` (either direction).
    pub(crate) fn sample_times(&self, t0: f64, t1: f64) -> Vec<f64> {
        let span = t1 - t0;
        let n = match self.dense_output_dt {
            Some(dt) => ((span.abs() / dt).round() as usize).max(1),
            None => DEFAULT_SAMPLES,
        };
        (1..=n)
            .map(|i| if i == n { t1 } else { t0 + span * i as f64 / n as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorMeta {
    pub method: String,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    pub rhs_evals: u64,
    /// `λ_max · (t_end − t_0)`, a resolution indicator
    pub lambda_max_times_span: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    SuspectedBlowUp { t: f64, reason: String },
    StepBudgetExhausted { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub values: Vec<f64>,
    pub initial: f64,
    /// `max_i |H_i − H_0| / |H_0|` (absolute when `H_0 = 0`)
    pub max_relative_drift: f64,
}

impl EnergyRecord {
    pub fn from_values(values: Vec<f64>) -> Self {
        let initial = values.first().copied().unwrap_or(0.0);
        let scale = if initial == 0.0 { 1.0 } else { initial.abs() };
        let max_relative_drift = values
            .iter()
            .map(|h| (h - initial).abs() / scale)
            .fold(0.0, f64::max);
        EnergyRecord {
            values,
            initial,
            max_relative_drift,
        }
    }

    pub fn relative_drift(&self) -> Vec<f64> {
        let scale = if self.initial == 0.0 { 1.0 } else { self.initial.abs() };
        self.values.iter().map(|h| (h - self.initial) / scale).collect()
    }
}

/// Time-ordered samples of a solution together with integrator diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<SpectralState>,
    pub meta: IntegratorMeta,
    pub status: RunStatus,
    /// maximal sample runs with `c(t) < 1e-12`
    pub degenerate_intervals: Vec<(f64, f64)>,
    pub hamiltonian: Option<EnergyRecord>,
}

impl Trajectory {
    pub fn states(&self) -> &[SpectralState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn spectrum(&self) -> &Arc<Spectrum> {
        self.states[0].spectrum()
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn initial(&self) -> &SpectralState {
        &self.states[0]
    }

    pub fn last(&self) -> &SpectralState {
        &self.states[self.states.len() - 1]
    }

    pub fn is_complete(&self) -> bool {
        self.status == RunStatus::Completed
    }

    /// Cubic Hermite interpolation of `u` from `(u, u')` at neighbouring
    /// samples; `v` is the derivative of the same interpolant.
    pub fn interpolate(&self, t: f64) -> Result<SpectralState> {
        let first = self.states[0].t;
        let last = self.last().t;
        let (lo, hi) = if first <= last { (first, last) } else { (last, first) };
        if !(t >= lo && t <= hi) {
            return Err(Error::InvalidArgument(format!(
                "t = {t} is outside the trajectory span [{lo}, {hi}]"
            )));
        }
        let forward = first <= last;
        let idx = self
            .states
            .partition_point(|s| if forward { s.t <= t } else { s.t >= t })
            .clamp(1, self.states.len().max(2) - 1);
        if self.states.len() == 1 {
            return Ok(self.states[0].clone());
        }
        let (a, b) = (&self.states[idx - 1], &self.states[idx]);
        let (u, v) = hermite(
            a.t,
            b.t,
            t,
            a.u.components(),
            a.v.components(),
            b.u.components(),
            b.v.components(),
        );
        let s = self.spectrum();
        Ok(SpectralState {
            t,
            u: SpectralVector::new(s.clone(), u)?,
            v: SpectralVector::new(s.clone(), v)?,
        })
    }
}

/// Cubic Hermite interpolant of `x` with derivative `dx` on `[t0, t1]`,
/// returning the value and its derivative at `t`.
pub(crate) fn hermite(
    t0: f64,
    t1: f64,
    t: f64,
    x0: &[f64],
    dx0: &[f64],
    x1: &[f64],
    dx1: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let d00 = (6.0 * s2 - 6.0 * s) / h;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = (-6.0 * s2 + 6.0 * s) / h;
    let d11 = 3.0 * s2 - 2.0 * s;
    let n = x0.len();
    let mut val = Vec::with_capacity(n);
    let mut der = Vec::with_capacity(n);
    for i in 0..n {
        val.push(h00 * x0[i] + h10 * h * dx0[i] + h01 * x1[i] + h11 * h * dx1[i]);
        der.push(d00 * x0[i] + d10 * dx0[i] + d01 * x1[i] + d11 * dx1[i]);
    }
    (val, der)
}

/// Time-dependent coefficient `c(t)` of the linearized equation.
pub trait TimeCoefficient {
    fn eval(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64> TimeCoefficient for F {
    fn eval(&self, t: f64) -> f64 {
        self(t)
    }
}

/// `c(t) = f(t)` for a [`FunctionSpec`] read as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecCoefficient(pub FunctionSpec);

impl TimeCoefficient for SpecCoefficient {
    fn eval(&self, t: f64) -> f64 {
        self.0.eval(t)
    }
}

/// `c(t) = m(|A^{1/2} u(t)|²)` along a stored trajectory (Hermite interpolated).
pub struct TrajectoryCoefficient<'a> {
    pub trajectory: &'a Trajectory,
    pub m: &'a FunctionSpec,
}

impl TimeCoefficient for TrajectoryCoefficient<'_> {
    fn eval(&self, t: f64) -> f64 {
        match self.trajectory.interpolate(t) {
            Ok(s) => self.m.eval(s.sigma()),
            Err(_) => f64::NAN,
        }
    }
}

struct KirchhoffSystem<'a> {
    lambda_sq: Vec<f64>,
    m: &'a FunctionSpec,
}

impl OdeSystem for KirchhoffSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.lambda_sq.len()
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.lambda_sq.len();
        let (u, v) = y.split_at(n);
        let mut acc = NeumaierSum::new();
        for (l2, x) in self.lambda_sq.iter().zip(u) {
            acc += l2 * x * x;
        }
        let sigma = acc.total();
        let c = self.m.eval(sigma);
        if !(c >= 0.0) {
            return Err(Error::NegativeNonlinearity { sigma, value: c, t });
        }
        let (du, dv) = dy.split_at_mut(n);
        du.copy_from_slice(v);
        for k in 0..n {
            dv[k] = -c * self.lambda_sq[k] * u[k];
        }
        Ok(())
    }
}

struct LinearSystem<'a, C: ?Sized> {
    lambda_sq: Vec<f64>,
    c: &'a C,
}

impl<C: TimeCoefficient + ?Sized> OdeSystem for LinearSystem<'_, C> {
    fn dim(&self) -> usize {
        2 * self.lambda_sq.len()
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.lambda_sq.len();
        let c = self.c.eval(t);
        if !(c >= 0.0) {
            return Err(Error::NegativeCoefficient { t, value: c });
        }
        let (u, v) = y.split_at(n);
        let (du, dv) = dy.split_at_mut(n);
        du.copy_from_slice(v);
        for k in 0..n {
            dv[k] = -c * self.lambda_sq[k] * u[k];
        }
        Ok(())
    }
}

struct RawRun {
    states: Vec<SpectralState>,
    stats: StepStats,
    status: RunStatus,
}

fn run<S: OdeSystem>(
    sys: &S,
    init: &SpectralState,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<RawRun> {
    cfg.validate()?;
    let spectrum = init.spectrum().clone();
    let outputs = cfg.sample_times(init.t, t_end);
    let mut states = Vec::with_capacity(outputs.len() + 1);
    let mut escaped: Option<(f64, String)> = None;
    let outcome = ode::integrate(sys, init.t, &init.packed(), t_end, &outputs, &cfg.solver(), |t, y| {
        let size = y.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !size.is_finite() || size > BLOW_UP_THRESHOLD {
            escaped = Some((t, format!("state norm {size:e} exceeds {BLOW_UP_THRESHOLD:e}")));
            return Ok(Control::Stop);
        }
        states.push(SpectralState::unpack(&spectrum, t, y));
        Ok(Control::Continue)
    })?;
    let status = match (outcome.termination, escaped) {
        (_, Some((t, reason))) => RunStatus::SuspectedBlowUp { t, reason },
        (Termination::Completed, None) | (Termination::Stopped { .. }, None) => RunStatus::Completed,
        (Termination::StepUnderflow { t }, None) => RunStatus::SuspectedBlowUp {
            t,
            reason: "step-size underflow".into(),
        },
        (Termination::TooManySteps { t }, None) => RunStatus::StepBudgetExhausted { t },
    };
    Ok(RawRun {
        states,
        stats: outcome.stats,
        status,
    })
}

fn meta(stats: StepStats, cfg: &IntegratorConfig, spectrum: &Spectrum, span: f64) -> IntegratorMeta {
    IntegratorMeta {
        method: ode::METHOD_NAME.to_string(),
        rel_tol: cfg.rel_tol,
        abs_tol: cfg.abs_tol,
        accepted_steps: stats.accepted,
        rejected_steps: stats.rejected,
        rhs_evals: stats.rhs_evals,
        lambda_max_times_span: spectrum.lambda_max() * span.abs(),
    }
}

fn degenerate_intervals(times: &[f64], c: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start: Option<f64> = None;
    let mut prev = 0.0;
    for (&t, &ci) in times.iter().zip(c) {
        if ci < DEGENERACY_THRESHOLD {
            start.get_or_insert(t);
        } else if let Some(s) = start.take() {
            out.push((s, prev));
        }
        prev = t;
    }
    if let Some(s) = start {
        out.push((s, prev));
    }
    out
}

/// Integrates the nonlinear system from `init` to `t_end` (which may lie on
/// either side of `init.t`).
pub fn evolve(
    init: &SpectralState,
    m: &FunctionSpec,
    cfg: &IntegratorConfig,
    t_end: f64,
) -> Result<Trajectory> {
    m.validate()?;
    if !(t_end.is_finite() && t_end != init.t) {
        return Err(Error::InvalidArgument(format!(
            "final time {t_end} must be finite and differ from the initial time {}",
            init.t
        )));
    }
    let spectrum = init.spectrum().clone();
    let sys = KirchhoffSystem {
        lambda_sq: spectrum.lambdas().iter().map(|l| l * l).collect(),
        m,
    };
    let raw = run(&sys, init, t_end, cfg)?;
    let times: Vec<f64> = raw.states.iter().map(|s| s.t).collect();
    let c: Vec<f64> = raw.states.iter().map(|s| m.eval(s.sigma())).collect();
    let hamiltonian = raw
        .states
        .iter()
        .map(|s| hamiltonian(s, m))
        .collect::<Result<Vec<f64>>>()
        .ok()
        .map(EnergyRecord::from_values);
    Ok(Trajectory {
        meta: meta(raw.stats, cfg, &spectrum, t_end - init.t),
        status: raw.status,
        degenerate_intervals: degenerate_intervals(&times, &c),
        hamiltonian,
        states: raw.states,
    })
}

/// Integrates `u'' + c(t) A u = 0`; all modes share one step control.
pub fn linear_evolve<C: TimeCoefficient + ?Sized>(
    init: &SpectralState,
    c: &C,
    cfg: &IntegratorConfig,
    t_end: f64,
) -> Result<Trajectory> {
    if !(t_end.is_finite() && t_end != init.t) {
        return Err(Error::InvalidArgument(format!(
            "final time {t_end} must be finite and differ from the initial time {}",
            init.t
        )));
    }
    let spectrum = init.spectrum().clone();
    let sys = LinearSystem {
        lambda_sq: spectrum.lambdas().iter().map(|l| l * l).collect(),
        c,
    };
    let raw = run(&sys, init, t_end, cfg)?;
    let times: Vec<f64> = raw.states.iter().map(|s| s.t).collect();
    let cs: Vec<f64> = times.iter().map(|&t| c.eval(t)).collect();
    Ok(Trajectory {
        meta: meta(raw.stats, cfg, &spectrum, t_end - init.t),
        status: raw.status,
        degenerate_intervals: degenerate_intervals(&times, &cs),
        hamiltonian: None,
        states: raw.states,
    })
}

/// Antiderivative `M(σ) = ∫_0^σ m`, closed form for the preset kinds and
/// adaptive Gauss–Kronrod quadrature otherwise.
pub fn antiderivative(m: &FunctionSpec, sigma: f64) -> Result<f64> {
    if let Some(v) = m.antiderivative(sigma) {
        return Ok(v);
    }
    let s = sigma.max(0.0);
    let tol = ANTIDERIVATIVE_TOL * (1.0 + s * m.eval(s).abs());
    quadrature::integrate(|x| m.eval(x), 0.0, s, &m.breakpoints(0.0, s), tol)
        .ok_or(Error::Quadrature { sigma })
}

/// `|u'|² + M(|A^{1/2} u|²)` with `M(0) = 0`.
pub fn hamiltonian(s: &SpectralState, m: &FunctionSpec) -> Result<f64> {
    let kinetic = s.v.weighted_square(0);
    Ok(kinetic + antiderivative(m, s.sigma())?)
}

/// `|A^{1/4} u'|² + |A^{3/4} u|² = Σ λ_k v_k² + Σ λ_k³ u_k²`
pub fn higher_order_energy(s: &SpectralState) -> f64 {
    let lambdas = s.spectrum().lambdas();
    let mut acc = NeumaierSum::new();
    for (l, v) in lambdas.iter().zip(s.v.components()) {
        acc += l * v * v;
    }
    for (l, u) in lambdas.iter().zip(s.u.components()) {
        acc += l * l * l * u * u;
    }
    acc.total()
}

/// Second-order quantity
/// `(a + bσ)|A^{1/2}u'|² + |Au|²/(a + bσ) − (b/4)(σ')²`, σ = `|A^{1/2}u|²`,
/// where `σ' = 2⟨Au, u'⟩`. Constant in time when `m(σ) = (a + bσ)^{-2}`.
pub fn pohozaev_invariant(s: &SpectralState, a: f64, b: f64) -> Result<f64> {
    let lambdas = s.spectrum().lambdas();
    let (u, v) = (s.u.components(), s.v.components());
    let d = a + b * s.sigma();
    if !(d > 0.0) {
        return Err(Error::PohozaevDegenerate { value: d });
    }
    let grad_v = weighted_square(lambdas, v, 1);
    let au = weighted_square(lambdas, u, 2);
    let cross = weighted_dot(lambdas, u, v, 1);
    Ok(crate::summation::sum([d * grad_v, au / d, -b * cross * cross]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `(δ, max_{|t−s|≤δ} |c(t) − c(s)|)` over the samples
    pub modulus_profile: Vec<(f64, f64)>,
    /// mean spacing between successive maxima of `|A^{1/2}u|²`, when at
    /// least two are observed
    pub period: Option<f64>,
}

/// `c(t_i) = m(|A^{1/2}u(t_i)|²)` at every sample plus its empirical
/// continuity-modulus profile. Without `deltas`, δ runs over the powers of two
/// times the sample spacing up to the trajectory span.
pub fn coefficient_trace(tr: &Trajectory, m: &FunctionSpec, deltas: Option<&[f64]>) -> CoefficientTrace {
    let times = tr.times();
    let values: Vec<f64> = tr.states().iter().map(|s| m.eval(s.sigma())).collect();
    let span = (times[times.len() - 1] - times[0]).abs();
    let default_deltas: Vec<f64>;
    let deltas = match deltas {
        Some(d) => d,
        None => {
            let dt = if times.len() > 1 { (times[1] - times[0]).abs() } else { span };
            let mut d = Vec::new();
            let mut x = dt;
            while x <= span * (1.0 + 1e-12) && x > 0.0 {
                d.push(x);
                x *= 2.0;
            }
            default_deltas = d;
            &default_deltas
        }
    };
    let modulus_profile = deltas
        .iter()
        .map(|&delta| {
            let mut worst = 0.0f64;
            for i in 0..times.len() {
                for j in (i + 1)..times.len() {
                    if (times[j] - times[i]).abs() > delta * (1.0 + 1e-12) {
                        break;
                    }
                    worst = worst.max((values[j] - values[i]).abs());
                }
            }
            (delta, worst)
        })
        .collect();
    CoefficientTrace {
        period: sigma_period(tr, &values),
        times,
        values,
        modulus_profile,
    }
}

/// Locates maxima of σ(t) as downward zero crossings of σ' = 2⟨Au, u'⟩,
/// refined by cubic Hermite interpolation with σ'' = 2(|A^{1/2}u'|² − c|Au|²).
fn sigma_period(tr: &Trajectory, c: &[f64]) -> Option<f64> {
    let lambdas = tr.spectrum().lambdas();
    let states = tr.states();
    let f: Vec<f64> = states
        .iter()
        .map(|s| 2.0 * weighted_dot(lambdas, s.u.components(), s.v.components(), 1))
        .collect();
    let df: Vec<f64> = states
        .iter()
        .zip(c)
        .map(|(s, ci)| {
            2.0 * (weighted_square(lambdas, s.v.components(), 1)
                - ci * weighted_square(lambdas, s.u.components(), 2))
        })
        .collect();
    let mut maxima = Vec::new();
    for i in 1..states.len() {
        if f[i - 1] > 0.0 && f[i] <= 0.0 {
            let (t0, t1) = (states[i - 1].t, states[i].t);
            // bisection on the Hermite interpolant of σ'
            let eval = |t: f64| hermite(t0, t1, t, &[f[i - 1]], &[df[i - 1]], &[f[i]], &[df[i]]).0[0];
            let (mut lo, mut hi) = (t0, t1);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if eval(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            maxima.push(0.5 * (lo + hi));
        }
    }
    if maxima.len() < 2 {
        return None;
    }
    Some((maxima[maxima.len() - 1] - maxima[0]) / (maxima.len() - 1) as f64)
}
