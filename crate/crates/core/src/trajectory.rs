//! Reparametrization of a solution by `s = ψ(t) = |A^{1/2}u(t)|² − |A^{1/2}u₀|²`.
//!
//! On an interval where ψ is strictly monotone, `z(s) = A^{1/2}u(ψ⁻¹(s))` and
//! `w(s) = u'(ψ⁻¹(s))` solve the autonomous system
//!
//! ```text
//! z' = A^{1/2}w / D,   w' = −m(s + σ₀) A^{1/2}z / D,   D = 2⟨A^{1/2}z, w⟩,
//! ```
//!
//! and ψ itself solves `ψ' = F(ψ)` with `F(s) = D(s)`. When `ψ'(0) = 0` the
//! denominator vanishes at `s = 0`; the curve is then started from a short
//! run in `t` and continued in `s` once `|ψ'|` exceeds a handoff threshold.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::{as_quantities, DEFAULT_HP_MAIN_TOL};
use crate::dynamics::{evolve, hermite, IntegratorConfig, SpectralState, Trajectory};
use crate::error::{Error, Result};
use crate::function::FunctionSpec;
use crate::ode::{self, Control, OdeSystem, StepStats};
use crate::quadrature;
use crate::spectrum::{weighted_dot, weighted_square, SpectralVector, Spectrum};
use crate::summation::NeumaierSum;

pub const DEFAULT_DELTA_DEN: f64 = 1.0e-10;
const BOOTSTRAP_GROWTH: f64 = 1.05;
const BOOTSTRAP_ATTEMPTS: usize = 40;

/// `δ_boot = 10⁻⁴ (1 + |ψ''(0)|)`
pub fn bootstrap_threshold(psi_dd0: f64) -> f64 {
    1.0e-4 * (1.0 + psi_dd0.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiTrace {
    pub t: Vec<f64>,
    pub psi: Vec<f64>,
    /// `ψ'(t) = F(ψ(t))`
    pub f: Vec<f64>,
}

fn psi_value(lambdas: &[f64], u: &[f64], u0: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    for ((l, x), y) in lambdas.iter().zip(u).zip(u0) {
        acc += l * l * (x - y) * (x + y);
    }
    acc.total()
}

pub fn psi_trace(tr: &Trajectory, u0: &SpectralVector) -> Result<PsiTrace> {
    let first = tr.initial();
    first.u.ensure_shared(u0)?;
    if first.u.components() != u0.components() {
        return Err(Error::InvalidArgument("trajectory does not start at u0".into()));
    }
    let lambdas = u0.spectrum().lambdas();
    let mut out = PsiTrace {
        t: Vec::with_capacity(tr.len()),
        psi: Vec::with_capacity(tr.len()),
        f: Vec::with_capacity(tr.len()),
    };
    for s in tr.states() {
        out.t.push(s.t);
        out.psi.push(psi_value(lambdas, s.u.components(), u0.components()));
        out.f.push(2.0 * weighted_dot(lambdas, s.u.components(), s.v.components(), 1));
    }
    Ok(out)
}

/// `(ψ'(0), ψ''(0)) = (2·as1, 2·as2)`
pub fn psi_initial_derivatives(u0: &SpectralVector, u1: &SpectralVector, m: &FunctionSpec) -> Result<(f64, f64)> {
    let (as1, as2) = as_quantities(u0, u1, m)?;
    Ok((2.0 * as1, 2.0 * as2))
}

/// A solution parametrized by `s`, sampled at `s` values monotone in
/// `direction`.
#[derive(Debug, Clone, PartialEq)]
pub struct SCurve {
    pub s: Vec<f64>,
    /// `A^{1/2}u`
    pub z: Vec<SpectralVector>,
    /// `u'`
    pub w: Vec<SpectralVector>,
    /// `+1` or `−1`
    pub direction: f64,
    pub sigma0: f64,
    pub m: FunctionSpec,
    /// index of the first sample from which the `s`-system is well posed;
    /// earlier samples come from the bootstrap run in `t`
    pub regular_from: usize,
    pub bootstrap_t: Option<f64>,
    pub stats: StepStats,
}

impl SCurve {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn spectrum(&self) -> &Arc<Spectrum> {
        self.z[0].spectrum()
    }

    /// `s` value where the regular part starts.
    pub fn s_regular_start(&self) -> f64 {
        self.s[self.regular_from]
    }

    pub fn s_end(&self) -> f64 {
        self.s[self.s.len() - 1]
    }

    /// Builds the curve directly from samples of a solution, over the prefix
    /// on which ψ is strictly monotone.
    pub fn from_trajectory(tr: &Trajectory, m: &FunctionSpec) -> Result<SCurve> {
        let u0 = tr.initial().u.clone();
        let trace = psi_trace(tr, &u0)?;
        let direction = trace
            .psi
            .iter()
            .find(|p| **p != 0.0)
            .map(|p| p.signum())
            .ok_or(Error::NonMonotone { t: tr.initial().t })?;
        let mut end = 1;
        while end < trace.psi.len() && direction * (trace.psi[end] - trace.psi[end - 1]) > 0.0 {
            end += 1;
        }
        if end < 2 {
            return Err(Error::NonMonotone { t: trace.t[0] });
        }
        let spectrum = u0.spectrum().clone();
        let lambdas = spectrum.lambdas();
        let d2 = psi_initial_derivatives(&u0, &tr.initial().v, m)?.1;
        let delta_boot = bootstrap_threshold(d2);
        let regular_from = trace.f[..end].iter().position(|f| direction * f >= delta_boot).unwrap_or(end - 1);
        let mut z = Vec::with_capacity(end);
        let mut w = Vec::with_capacity(end);
        for s in &tr.states()[..end] {
            z.push(sqrt_a(&spectrum, lambdas, s.u.components()));
            w.push(s.v.clone());
        }
        Ok(SCurve {
            s: trace.psi[..end].to_vec(),
            z,
            w,
            direction,
            sigma0: u0.energy_sigma(),
            m: m.clone(),
            regular_from,
            bootstrap_t: (regular_from > 0).then(|| trace.t[regular_from]),
            stats: StepStats::default(),
        })
    }

    fn derivatives(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let lambdas = self.spectrum().lambdas();
        let (z, w) = (self.z[i].components(), self.w[i].components());
        let d = 2.0 * dot_lambda(lambdas, z, w);
        let c = self.m.eval(self.s[i] + self.sigma0);
        (
            lambdas.iter().zip(w).map(|(l, x)| l * x / d).collect(),
            lambdas.iter().zip(z).map(|(l, x)| -c * l * x / d).collect(),
        )
    }

    /// `(z(s), w(s))`: cubic Hermite on the regular part, linear on the
    /// bootstrap part.
    pub fn interpolate(&self, s: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = self.direction * s;
        let last = self.s.len() - 1;
        let (x0, x1) = (self.direction * self.s[0], self.direction * self.s[last]);
        if !(x >= x0 && x <= x1) {
            return Err(Error::InvalidArgument(format!(
                "s = {s} is outside the curve range [{}, {}]",
                self.s[0].min(self.s[last]),
                self.s[0].max(self.s[last])
            )));
        }
        if last == 0 {
            return Ok((self.z[0].components().to_vec(), self.w[0].components().to_vec()));
        }
        let i = self.s.partition_point(|v| self.direction * v <= x).clamp(1, last);
        let (a, b) = (i - 1, i);
        if a >= self.regular_from {
            let (dza, dwa) = self.derivatives(a);
            let (dzb, dwb) = self.derivatives(b);
            let (z, _) = hermite(self.s[a], self.s[b], s, self.z[a].components(), &dza, self.z[b].components(), &dzb);
            let (w, _) = hermite(self.s[a], self.s[b], s, self.w[a].components(), &dwa, self.w[b].components(), &dwb);
            Ok((z, w))
        } else {
            let theta = (s - self.s[a]) / (self.s[b] - self.s[a]);
            let lerp = |p: &SpectralVector, q: &SpectralVector| -> Vec<f64> {
                p.components()
                    .iter()
                    .zip(q.components())
                    .map(|(x, y)| x + theta * (y - x))
                    .collect()
            };
            Ok((lerp(&self.z[a], &self.z[b]), lerp(&self.w[a], &self.w[b])))
        }
    }
}

fn sqrt_a(spectrum: &Arc<Spectrum>, lambdas: &[f64], u: &[f64]) -> SpectralVector {
    SpectralVector::new(spectrum.clone(), lambdas.iter().zip(u).map(|(l, x)| l * x).collect())
        .expect("length matches")
}

/// `Σ λ_k a_k b_k`
fn dot_lambda(lambdas: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    for ((l, x), y) in lambdas.iter().zip(a).zip(b) {
        acc += l * x * y;
    }
    acc.total()
}

struct CurveSystem<'a> {
    lambdas: &'a [f64],
    m: &'a FunctionSpec,
    sigma0: f64,
    direction: f64,
    delta_den: f64,
}

impl OdeSystem for CurveSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.lambdas.len()
    }

    fn rhs(&self, s: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.lambdas.len();
        let (z, w) = y.split_at(n);
        let d = 2.0 * dot_lambda(self.lambdas, z, w);
        if !(self.direction * d > self.delta_den) {
            return Err(Error::ParametrizationDegenerate { s });
        }
        let c = self.m.eval(s + self.sigma0);
        if !(c >= 0.0) {
            return Err(Error::NegativeNonlinearity {
                sigma: s + self.sigma0,
                value: c,
                t: s,
            });
        }
        let (dz, dw) = dy.split_at_mut(n);
        for k in 0..n {
            dz[k] = self.lambdas[k] * w[k] / d;
            dw[k] = -c * self.lambdas[k] * z[k] / d;
        }
        Ok(())
    }
}

/// Integrates the `(z, w)` system from `s = 0` to `s = ±s_max`, the sign being
/// that of the first nonvanishing derivative of ψ at 0.
pub fn solve_trajectory_system(
    u0: &SpectralVector,
    u1: &SpectralVector,
    m: &FunctionSpec,
    s_max: f64,
    cfg: &IntegratorConfig,
) -> Result<SCurve> {
    m.validate()?;
    cfg.validate()?;
    if !(s_max > 0.0 && s_max.is_finite()) {
        return Err(Error::InvalidArgument("s_max must be positive and finite".into()));
    }
    let (d1, d2) = psi_initial_derivatives(u0, u1, m)?;
    if d1.abs() + d2.abs() <= 2.0 * DEFAULT_HP_MAIN_TOL {
        return Err(Error::HpMainViolated);
    }
    let direction = if d1.abs() > 2.0 * DEFAULT_HP_MAIN_TOL { d1.signum() } else { d2.signum() };
    let delta_boot = bootstrap_threshold(d2);
    let spectrum = u0.spectrum().clone();
    let lambdas = spectrum.lambdas();
    let sigma0 = u0.energy_sigma();
    let s_end = direction * s_max;

    let mut s_vals = Vec::new();
    let mut zs = Vec::new();
    let mut ws = Vec::new();
    let mut bootstrap_t = None;
    let start_state;
    if direction * d1 >= delta_boot {
        start_state = SpectralState::new(0.0, u0.clone(), u1.clone())?;
    } else {
        let (prefix, state) = bootstrap(u0, u1, m, cfg, direction, delta_boot, d2)?;
        for s in &prefix {
            s_vals.push(psi_value(lambdas, s.u.components(), u0.components()));
            zs.push(sqrt_a(&spectrum, lambdas, s.u.components()));
            ws.push(s.v.clone());
        }
        bootstrap_t = Some(state.t);
        start_state = state;
    }
    let s_start = psi_value(lambdas, start_state.u.components(), u0.components());
    if direction * (s_end - s_start) <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "s_max = {s_max} lies inside the bootstrap region (|s| = {})",
            s_start.abs()
        )));
    }
    let regular_from = s_vals.len();

    let mut outputs = Vec::new();
    let uniform = cfg.sample_times(s_start, s_end);
    if bootstrap_t.is_some() {
        // geometric spacing until it reaches the uniform spacing
        let spacing = (uniform[0] - s_start).abs();
        let switch = spacing / (BOOTSTRAP_GROWTH - 1.0);
        let mut x = direction * s_start * BOOTSTRAP_GROWTH;
        while x < switch {
            outputs.push(direction * x);
            x *= BOOTSTRAP_GROWTH;
        }
    }
    let last_geometric = outputs.last().map_or(f64::NEG_INFINITY, |v| direction * v);
    outputs.extend(uniform.into_iter().filter(|v| direction * v > last_geometric));

    let sys = CurveSystem {
        lambdas,
        m,
        sigma0,
        direction,
        delta_den: DEFAULT_DELTA_DEN,
    };
    let mut y0: Vec<f64> = lambdas.iter().zip(start_state.u.components()).map(|(l, x)| l * x).collect();
    y0.extend_from_slice(start_state.v.components());
    let n = lambdas.len();
    let outcome = ode::integrate(&sys, s_start, &y0, s_end, &outputs, &cfg.solver(), |s, y| {
        s_vals.push(s);
        zs.push(SpectralVector::new(spectrum.clone(), y[..n].to_vec())?);
        ws.push(SpectralVector::new(spectrum.clone(), y[n..].to_vec())?);
        Ok(Control::Continue)
    })?;
    if outcome.termination != ode::Termination::Completed {
        return Err(Error::ParametrizationDegenerate { s: outcome.t });
    }
    Ok(SCurve {
        s: s_vals,
        z: zs,
        w: ws,
        direction,
        sigma0,
        m: m.clone(),
        regular_from,
        bootstrap_t,
        stats: outcome.stats,
    })
}

/// Runs the equation in `t` until `direction·ψ'` exceeds `delta_boot`.
/// Returns the samples before the handoff and the handoff state.
fn bootstrap(
    u0: &SpectralVector,
    u1: &SpectralVector,
    m: &FunctionSpec,
    cfg: &IntegratorConfig,
    direction: f64,
    delta_boot: f64,
    d2: f64,
) -> Result<(Vec<SpectralState>, SpectralState)> {
    let init = SpectralState::new(0.0, u0.clone(), u1.clone())?;
    let lambdas = u0.spectrum().lambdas();
    let mut span = 4.0 * delta_boot / d2.abs().max(f64::MIN_POSITIVE);
    for _ in 0..BOOTSTRAP_ATTEMPTS {
        let run_cfg = IntegratorConfig {
            dense_output_dt: Some(span / 200.0),
            ..*cfg
        };
        let tr = evolve(&init, m, &run_cfg, span)?;
        let states = tr.states();
        let mut prev = 0.0;
        for (i, s) in states.iter().enumerate() {
            let psi = psi_value(lambdas, s.u.components(), u0.components());
            if i > 0 && direction * (psi - prev) <= 0.0 {
                return Err(Error::NonMonotone { t: s.t });
            }
            prev = psi;
            let f = 2.0 * weighted_dot(lambdas, s.u.components(), s.v.components(), 1);
            if i > 0 && direction * f >= delta_boot {
                return Ok((states[..i].to_vec(), s.clone()));
            }
        }
        if !tr.is_complete() {
            return Err(Error::ParametrizationDegenerate { s: prev });
        }
        span *= 4.0;
    }
    Err(Error::ParametrizationDegenerate { s: 0.0 })
}

/// Tabulated `G = F²` with exact slopes, read along `x = direction·s ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedTable {
    x: Vec<f64>,
    g: Vec<f64>,
    dg: Vec<f64>,
    direction: f64,
}

impl SpeedTable {
    /// From values `F(s_i)` and slopes `F'(s_i)`; `s_0` must be 0.
    pub fn from_values(s: &[f64], f: &[f64], df: &[f64]) -> Result<Self> {
        if s.len() < 2 || s.len() != f.len() || s.len() != df.len() || s[0] != 0.0 {
            return Err(Error::InvalidArgument(
                "speed table needs at least two samples starting at s = 0".into(),
            ));
        }
        let direction = (s[s.len() - 1] - s[0]).signum();
        let x: Vec<f64> = s.iter().map(|v| direction * v).collect();
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::NonMonotone { t: s[0] });
        }
        let sign = f.iter().skip(1).map(|v| direction * v).collect::<Vec<_>>();
        if let Some(i) = sign.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::SignChange { sigma: s[i + 1] });
        }
        // d(F²)/dx = 2 F dF/ds · direction
        Ok(SpeedTable {
            g: f.iter().map(|v| v * v).collect(),
            dg: f.iter().zip(df).map(|(v, d)| 2.0 * v * d * direction).collect(),
            x,
            direction,
        })
    }

    /// From an [`SCurve`]: `F = D = 2⟨A^{1/2}z, w⟩` and
    /// `dG/ds = 4(|A^{1/2}w|² − m(s+σ₀)|A^{1/2}z|²)`, finite even where `F = 0`.
    pub fn from_curve(curve: &SCurve) -> Result<Self> {
        if curve.s[0] != 0.0 {
            return Err(Error::InvalidArgument("curve must start at s = 0".into()));
        }
        let lambdas = curve.spectrum().lambdas();
        let mut x = Vec::with_capacity(curve.len());
        let mut g = Vec::with_capacity(curve.len());
        let mut dg = Vec::with_capacity(curve.len());
        for i in 0..curve.len() {
            let (z, w) = (curve.z[i].components(), curve.w[i].components());
            let d = 2.0 * dot_lambda(lambdas, z, w);
            if i > 0 && !(curve.direction * d > 0.0) {
                return Err(Error::SignChange { sigma: curve.s[i] });
            }
            let c = curve.m.eval(curve.s[i] + curve.sigma0);
            let slope = 4.0 * (weighted_square(lambdas, w, 1) - c * squares_lambda2(lambdas, z));
            x.push(curve.direction * curve.s[i]);
            g.push(d * d);
            dg.push(curve.direction * slope);
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::NonMonotone { t: curve.s[0] });
        }
        Ok(SpeedTable {
            x,
            g,
            dg,
            direction: curve.direction,
        })
    }

    fn g_at(&self, x: f64) -> f64 {
        let last = self.x.len() - 1;
        let i = self.x.partition_point(|v| *v <= x).clamp(1, last);
        let (a, b) = (i - 1, i);
        let (v, _) = hermite(self.x[a], self.x[b], x, &[self.g[a]], &[self.dg[a]], &[self.g[b]], &[self.dg[b]]);
        v[0].max(0.0)
    }

    /// Travel time across `[x_i, x]` inside interval `i`. On the first
    /// interval the substitution `x = τ²` removes the `1/√x` singularity
    /// present when `F(0) = 0`.
    fn interval_time(&self, i: usize, x: f64) -> Option<f64> {
        if i == 0 {
            let tau = x.sqrt();
            let f = |t: f64| {
                if t == 0.0 {
                    if self.g[0] > 0.0 {
                        0.0
                    } else {
                        2.0 / self.dg[0].max(f64::MIN_POSITIVE).sqrt()
                    }
                } else {
                    2.0 * t / self.g_at(t * t).sqrt()
                }
            };
            quadrature::integrate(f, 0.0, tau, &[], 1e-14 * (1.0 + tau))
        } else {
            let a = self.x[i];
            let f = |v: f64| 1.0 / self.g_at(v).sqrt();
            quadrature::integrate(f, a, x, &[], 1e-14 * (1.0 + (x - a) * f(a)))
        }
    }

    /// Time needed to traverse the whole table.
    pub fn travel_time(&self) -> Option<f64> {
        self.cumulative_times().map(|c| c[c.len() - 1])
    }

    /// Travel times from 0 to every tabulated point.
    fn cumulative_times(&self) -> Option<Vec<f64>> {
        let mut out = vec![0.0];
        let mut acc = NeumaierSum::new();
        for i in 0..self.x.len() - 1 {
            acc += self.interval_time(i, self.x[i + 1])?;
            out.push(acc.total());
        }
        Some(out)
    }

    fn speed(&self, x: f64) -> f64 {
        self.direction * self.g_at(x).sqrt()
    }
}

fn squares_lambda2(lambdas: &[f64], z: &[f64]) -> f64 {
    weighted_square(lambdas, z, 1)
}

/// Solves `ψ' = F(ψ)`, `ψ(0) = 0` on `[0, T]` along the nontrivial branch
/// leaving 0, by inverting `t(s) = ∫_0^s dσ/F(σ)`.
pub fn solve_parametrization(curve: &SCurve, t_end: f64, cfg: &IntegratorConfig) -> Result<PsiTrace> {
    solve_with_table(&SpeedTable::from_curve(curve)?, t_end, cfg)
}

pub fn solve_with_table(table: &SpeedTable, t_end: f64, cfg: &IntegratorConfig) -> Result<PsiTrace> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument("final time must be positive".into()));
    }
    let x_max = table.x[table.x.len() - 1];
    let cumulative = table.cumulative_times().ok_or(Error::Quadrature { sigma: x_max })?;
    let t_max = cumulative[cumulative.len() - 1];
    if t_end > t_max * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "the tabulated range is traversed by t = {t_max}, before T = {t_end}"
        )));
    }
    let mut times = vec![0.0];
    times.extend(cfg.sample_times(0.0, t_end));
    let mut out = PsiTrace {
        t: Vec::with_capacity(times.len()),
        psi: Vec::with_capacity(times.len()),
        f: Vec::with_capacity(times.len()),
    };
    for &t in &times {
        let x = if t == 0.0 {
            0.0
        } else {
            let i = cumulative.partition_point(|v| *v <= t).clamp(1, cumulative.len() - 1) - 1;
            let (mut a, mut b) = (table.x[i], table.x[i + 1]);
            for _ in 0..100 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                let tm = cumulative[i] + table.interval_time(i, mid).ok_or(Error::Quadrature { sigma: mid })?;
                if tm < t {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            0.5 * (a + b)
        };
        out.t.push(t);
        out.psi.push(table.direction * x);
        out.f.push(table.speed(x));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReparamReport {
    /// max of `|z(ψ(t_i)) − A^{1/2}u(t_i)| + |w(ψ(t_i)) − u'(t_i)|`
    pub max_deviation: f64,
    pub worst_t: f64,
    pub compared: usize,
}

/// Compares a curve with a trajectory at `s = ψ(t_i)` for the samples whose
/// ψ lies in the regular part of the curve, up to the first sample where ψ
/// stops being strictly monotone.
pub fn reparametrization_check(tr: &Trajectory, curve: &SCurve, u0: &SpectralVector) -> Result<ReparamReport> {
    let trace = psi_trace(tr, u0)?;
    let dir = curve.direction;
    let (x_lo, x_hi) = (dir * curve.s_regular_start(), dir * curve.s_end());
    let lambdas = u0.spectrum().lambdas();
    let mut report = ReparamReport {
        max_deviation: 0.0,
        worst_t: trace.t[0],
        compared: 0,
    };
    for i in 0..trace.t.len() {
        let x = dir * trace.psi[i];
        if x > x_hi {
            break;
        }
        if i > 0 && !(dir * (trace.psi[i] - trace.psi[i - 1]) > 0.0) {
            if i == 1 {
                return Err(Error::NonMonotone { t: trace.t[1] });
            }
            break;
        }
        if x < x_lo {
            continue;
        }
        let (z, w) = curve.interpolate(trace.psi[i])?;
        let st = &tr.states()[i];
        let dz: f64 = lambdas
            .iter()
            .zip(st.u.components())
            .zip(&z)
            .map(|((l, u), zz)| (zz - l * u).powi(2))
            .sum::<f64>()
            .sqrt();
        let dw: f64 = st.v.components().iter().zip(&w).map(|(v, ww)| (ww - v).powi(2)).sum::<f64>().sqrt();
        report.compared += 1;
        if dz + dw > report.max_deviation {
            report.max_deviation = dz + dw;
            report.worst_t = trace.t[i];
        }
    }
    if report.compared == 0 {
        return Err(Error::NonMonotone { t: trace.t[0] });
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundTripReport {
    /// max `|ψ̃(t_i) − ψ(t_i)|`
    pub psi_deviation: f64,
    /// max state deviation of `(z, w)(ψ̃(t_i))` against the direct run
    pub state_deviation: f64,
    pub compared: usize,
}

/// Reconstructs the direct run `tr` from `curve` through the parametrization
/// `psi` (sampled at the same times) on the regular window.
pub fn round_trip_deviation(tr: &Trajectory, curve: &SCurve, psi: &PsiTrace) -> Result<RoundTripReport> {
    let u0 = &tr.initial().u;
    let direct = psi_trace(tr, u0)?;
    let lambdas = u0.spectrum().lambdas();
    let x_lo = curve.direction * curve.s_regular_start();
    let mut rep = RoundTripReport {
        psi_deviation: 0.0,
        state_deviation: 0.0,
        compared: 0,
    };
    for (i, &t) in psi.t.iter().enumerate() {
        let j = direct.t.iter().position(|v| *v == t).ok_or_else(|| {
            Error::InvalidArgument(format!("parametrization time {t} is not a trajectory sample"))
        })?;
        rep.psi_deviation = rep.psi_deviation.max((psi.psi[i] - direct.psi[j]).abs());
        if curve.direction * psi.psi[i] < x_lo {
            continue;
        }
        let (z, w) = curve.interpolate(psi.psi[i])?;
        let st = &tr.states()[j];
        let mut dev = 0.0;
        for k in 0..lambdas.len() {
            dev += (z[k] - lambdas[k] * st.u.components()[k]).powi(2) + (w[k] - st.v.components()[k]).powi(2);
        }
        rep.state_deviation = rep.state_deviation.max(dev.sqrt());
        rep.compared += 1;
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(l: f64, u: f64, v: f64) -> (SpectralVector, SpectralVector) {
        let s = Arc::new(Spectrum::new(vec![l]).unwrap());
        (
            SpectralVector::new(s.clone(), vec![u]).unwrap(),
            SpectralVector::new(s, vec![v]).unwrap(),
        )
    }

    #[test]
    fn initial_derivative_examples() {
        let one = FunctionSpec::constant(1.0);
        let (u0, u1) = single(1.0, 1.0, 1.0);
        assert_eq!(psi_initial_derivatives(&u0, &u1, &one).unwrap(), (2.0, 0.0));
        let s = Arc::new(Spectrum::new(vec![1.0, 2.0]).unwrap());
        let e1 = SpectralVector::unit(s.clone(), 0).unwrap();
        let e2 = SpectralVector::unit(s.clone(), 1).unwrap();
        assert_eq!(psi_initial_derivatives(&e1, &e2, &one).unwrap(), (0.0, 6.0));
        let half = SpectralVector::new(s, vec![0.0, 0.5]).unwrap();
        assert_eq!(psi_initial_derivatives(&e1, &half, &one).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn psi_of_linear_single_mode() {
        let (u0, u1) = single(1.0, 1.0, 0.0);
        let init = SpectralState::new(0.0, u0.clone(), u1).unwrap();
        let tr = evolve(&init, &FunctionSpec::constant(1.0), &IntegratorConfig::default(), 1.0).unwrap();
        let p = psi_trace(&tr, &u0).unwrap();
        assert_eq!(p.psi[0], 0.0);
        for (t, psi) in p.t.iter().zip(&p.psi) {
            assert!((psi + t.sin().powi(2)).abs() < 1e-9);
        }
    }

    #[test]
    fn matched_data_is_refused() {
        let s = Arc::new(Spectrum::new(vec![1.0, 2.0]).unwrap());
        let e1 = SpectralVector::unit(s.clone(), 0).unwrap();
        let half = SpectralVector::new(s, vec![0.0, 0.5]).unwrap();
        let r = solve_trajectory_system(&e1, &half, &FunctionSpec::constant(1.0), 0.5, &IntegratorConfig::default());
        assert!(matches!(r, Err(Error::HpMainViolated)));
    }

    #[test]
    fn constant_speed_gives_identity() {
        let s: Vec<f64> = (0..=10).map(|i| i as f64 * 0.2).collect();
        let table = SpeedTable::from_values(&s, &[1.0; 11], &[0.0; 11]).unwrap();
        let p = solve_with_table(&table, 1.5, &IntegratorConfig::default().with_dt(0.25)).unwrap();
        for (t, psi) in p.t.iter().zip(&p.psi) {
            assert!((t - psi).abs() < 1e-12, "{t} {psi}");
        }
    }

    #[test]
    fn sign_change_is_rejected() {
        let s = [0.0, 0.5, 1.0];
        assert!(matches!(
            SpeedTable::from_values(&s, &[1.0, 1.0, -1.0], &[0.0; 3]),
            Err(Error::SignChange { .. })
        ));
    }

    #[test]
    fn regular_branch_matches_direct_run() {
        let m = FunctionSpec::constant(1.0);
        let (u0, u1) = single(1.0, 1.0, 1.0);
        let cfg = IntegratorConfig::default();
        let curve = solve_trajectory_system(&u0, &u1, &m, 0.9, &cfg).unwrap();
        assert!(curve.bootstrap_t.is_none());
        let t_end = 0.9f64.asin() / 2.0;
        let tr = evolve(&SpectralState::new(0.0, u0.clone(), u1).unwrap(), &m, &cfg, t_end).unwrap();
        let rep = reparametrization_check(&tr, &curve, &u0).unwrap();
        assert!(rep.max_deviation < 1e-6, "{rep:?}");
        let psi = solve_parametrization(&curve, t_end, &cfg).unwrap();
        for (t, p) in psi.t.iter().zip(&psi.psi) {
            assert!((p - (2.0 * t).sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn bootstrap_branch_matches_direct_run() {
        let m = FunctionSpec::constant(1.0);
        let (u0, u1) = single(1.0, 1.0, 0.0);
        let cfg = IntegratorConfig::default();
        let curve = solve_trajectory_system(&u0, &u1, &m, 0.9, &cfg).unwrap();
        assert_eq!(curve.direction, -1.0);
        assert!(curve.bootstrap_t.is_some());
        let t_end = 0.9f64.sqrt().asin();
        let tr = evolve(&SpectralState::new(0.0, u0.clone(), u1).unwrap(), &m, &cfg, t_end).unwrap();
        let rep = reparametrization_check(&tr, &curve, &u0).unwrap();
        assert!(rep.max_deviation < 1e-5, "{rep:?}");
        let psi = solve_parametrization(&curve, t_end * 0.999, &cfg).unwrap();
        assert!(psi.psi.iter().skip(1).all(|p| *p < 0.0));
        for (t, p) in psi.t.iter().zip(&psi.psi) {
            assert!((p + t.sin().powi(2)).abs() < 1e-7, "{t} {p}");
        }
    }

    #[test]
    fn self_comparison_is_tight() {
        let m = FunctionSpec::constant(1.0);
        let (u0, u1) = single(1.0, 1.0, 1.0);
        let init = SpectralState::new(0.0, u0.clone(), u1).unwrap();
        let tr = evolve(&init, &m, &IntegratorConfig::default(), 0.5).unwrap();
        let curve = SCurve::from_trajectory(&tr, &m).unwrap();
        let rep = reparametrization_check(&tr, &curve, &u0).unwrap();
        assert!(rep.max_deviation < 1e-8, "{rep:?}");
    }

    #[test]
    fn zero_solution_is_not_monotone() {
        let (u0, u1) = single(1.0, 0.0, 0.0);
        let m = FunctionSpec::constant(1.0);
        let tr = evolve(&SpectralState::new(0.0, u0.clone(), u1).unwrap(), &m, &IntegratorConfig::default(), 1.0).unwrap();
        assert!(matches!(SCurve::from_trajectory(&tr, &m), Err(Error::NonMonotone { .. })));
        let (a, b) = single(1.0, 1.0, 1.0);
        let curve = solve_trajectory_system(&a, &b, &m, 0.5, &IntegratorConfig::default()).unwrap();
        assert!(matches!(reparametrization_check(&tr, &curve, &u0), Err(Error::NonMonotone { .. })));
    }
}
