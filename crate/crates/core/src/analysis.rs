//! Diagnostics computed on top of trajectories: norm traces along a scale of
//! shrinking radii, degeneracy classification, the uniqueness quantities at
//! `t = 0`, derivative-loss signatures and continuous-dependence experiments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::least_squares_slope;
use crate::dynamics::{antiderivative, evolve, hamiltonian, IntegratorConfig, SpectralState, Trajectory};
use crate::error::{Error, Result};
use crate::function::FunctionSpec;
use crate::modulus::estimate_continuity_constant;
use crate::norms::{gevrey_norm, sobolev_norm, GevreyParams};
use crate::spectrum::{weighted_square, SpectralVector};
use crate::summation::NeumaierSum;

pub const DEFAULT_MU_MIN: f64 = 1.0e-8;
pub const DEFAULT_HP_MAIN_TOL: f64 = 1.0e-10;
const REACHABLE_SIGMA_CAP: f64 = 1.0e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleTraceConfig {
    pub phi: FunctionSpec,
    pub r0: f64,
    #[serde(rename = "R")]
    pub shrink_rate: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleTraceRow {
    pub t: f64,
    pub radius: f64,
    /// `⫴u(t)⫴` at exponent α + 1/2
    pub u_norm: f64,
    /// `⫴u'(t)⫴` at exponent α
    pub v_norm: f64,
}

/// Norms of `(u(t), u'(t))` in `𝓖_{φ, r(t), α+1/2} × 𝓖_{φ, r(t), α}` with
/// `r(t) = r0 − R t`.
pub fn scale_norm_trace(tr: &Trajectory, cfg: &ScaleTraceConfig) -> Result<Vec<ScaleTraceRow>> {
    if !(cfg.r0 > 0.0) || !(cfg.shrink_rate >= 0.0) {
        return Err(Error::InvalidArgument("scale trace needs r0 > 0 and R ≥ 0".into()));
    }
    let radius = |t: f64| cfg.r0 - cfg.shrink_rate * t;
    if let Some(s) = tr.states().iter().find(|s| !(radius(s.t) > 0.0)) {
        return Err(Error::NonpositiveRadius { t: s.t });
    }
    tr.states()
        .iter()
        .map(|s| {
            let r = radius(s.t);
            let pu = GevreyParams::new(cfg.phi.clone(), r, cfg.alpha + 0.5)?;
            let pv = GevreyParams::new(cfg.phi.clone(), r, cfg.alpha)?;
            Ok(ScaleTraceRow {
                t: s.t,
                radius: r,
                u_norm: gevrey_norm(&s.u, &pu)?,
                v_norm: gevrey_norm(&s.v, &pv)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    StrictlyHyperbolic,
    MildlyDegenerate,
    ReallyDegenerate,
}

/// σ-range reachable from `state`: since `M(σ(t)) ≤ 𝓗`, σ stays in
/// `[0, σ_max]` with `M(σ_max) = 𝓗`. Returns `points` uniform values on that
/// range, with `|A^{1/2}u|²` inserted.
pub fn reachable_sigma_grid(state: &SpectralState, m: &FunctionSpec, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::InvalidArgument("reachable grid needs at least two points".into()));
    }
    let h = hamiltonian(state, m)?;
    let sigma0 = state.sigma();
    let mut hi = sigma0.max(1.0);
    while antiderivative(m, hi)? < h && hi < REACHABLE_SIGMA_CAP {
        hi *= 2.0;
    }
    let mut lo = sigma0;
    if antiderivative(m, hi)? >= h {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if antiderivative(m, mid)? < h {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let top = hi.max(sigma0);
    let mut grid: Vec<f64> = (0..points).map(|i| top * i as f64 / (points - 1) as f64).collect();
    grid.push(sigma0);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(grid)
}

pub fn classify_degeneracy(m: &FunctionSpec, u0: &SpectralVector, sigma_grid: &[f64]) -> Degeneracy {
    classify_degeneracy_with(m, u0, sigma_grid, DEFAULT_MU_MIN)
}

pub fn classify_degeneracy_with(
    m: &FunctionSpec,
    u0: &SpectralVector,
    sigma_grid: &[f64],
    mu_min: f64,
) -> Degeneracy {
    let mu = sigma_grid.iter().map(|&s| m.eval(s)).fold(f64::INFINITY, f64::min);
    if mu >= mu_min {
        Degeneracy::StrictlyHyperbolic
    } else if m.eval(u0.energy_sigma()).abs() > mu_min {
        Degeneracy::MildlyDegenerate
    } else {
        Degeneracy::ReallyDegenerate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    /// `⟨A u₀, u₁⟩`
    pub as1: f64,
    /// `|A^{1/2}u₁|² − m(|A^{1/2}u₀|²)|Au₀|²`
    pub as2: f64,
    pub hp_main_holds: bool,
    pub tolerance: f64,
}

/// The two quantities whose vanishing defines the degenerate initial data.
/// `ψ'(0) = 2·as1` and `ψ''(0) = 2·as2`.
pub fn as_quantities(u0: &SpectralVector, u1: &SpectralVector, m: &FunctionSpec) -> Result<(f64, f64)> {
    u0.ensure_shared(u1)?;
    let lambdas = u0.spectrum().lambdas();
    let as1 = u0.weighted_dot(u1, 1);
    let kinetic = weighted_square(lambdas, u1.components(), 1);
    let coeff = m.eval(u0.energy_sigma());
    let au = weighted_square(lambdas, u0.components(), 2);
    Ok((as1, kinetic - coeff * au))
}

pub fn uniqueness_condition(
    u0: &SpectralVector,
    u1: &SpectralVector,
    m: &FunctionSpec,
    tol: f64,
) -> Result<UniquenessReport> {
    let (as1, as2) = as_quantities(u0, u1, m)?;
    Ok(UniquenessReport {
        as1,
        as2,
        hp_main_holds: as1.abs() + as2.abs() > tol,
        tolerance: tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossProbeConfig {
    /// norm ratio above which growth counts towards a signature
    pub factor: f64,
    /// number of samples after `t = 0` used for the growth fit
    pub near_samples: usize,
}

impl Default for LossProbeConfig {
    fn default() -> Self {
        LossProbeConfig {
            factor: 10.0,
            near_samples: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossProbeEntry {
    pub alpha: f64,
    pub eps: f64,
    /// `|A^{α+ε} u(0)|`
    pub norm_at_zero: f64,
    /// max of `|A^{α+ε} u(t_j)|` over the near-zero samples
    pub norm_max: f64,
    pub ratio: f64,
    /// log-log slope of the norm against `t_j`; negative means growth as `t → 0⁺`
    pub growth_exponent: Option<f64>,
    /// `⫴u(t_j)⫴_{φ, ε, α}` max over the same samples, when finite
    pub gevrey_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossProbeReport {
    pub entries: Vec<LossProbeEntry>,
    /// α values for which every ε exceeds the configured ratio
    pub signature_alphas: Vec<f64>,
    pub signature: bool,
    pub truncation: usize,
}

/// Growth signatures of `|A^{α+ε}u(t)|` for `t → 0⁺`. At finite truncation
/// every norm is finite, so the result is a signature, never a proof of loss.
pub fn derivative_loss_probe(
    tr: &Trajectory,
    phi: &FunctionSpec,
    alpha_grid: &[f64],
    eps_grid: &[f64],
    cfg: &LossProbeConfig,
) -> Result<LossProbeReport> {
    let states = tr.states();
    if states[0].t != 0.0 {
        return Err(Error::InvalidArgument("derivative-loss probe needs a trajectory starting at t = 0".into()));
    }
    let near: Vec<&SpectralState> = states.iter().skip(1).filter(|s| s.t > 0.0).take(cfg.near_samples).collect();
    if near.len() < 3 || near.len() < cfg.near_samples.min(3) {
        return Err(Error::InsufficientSamples(format!(
            "{} samples after t = 0; refine the dense output",
            near.len()
        )));
    }
    let pairs: Vec<(f64, f64)> = alpha_grid
        .iter()
        .flat_map(|&a| eps_grid.iter().map(move |&e| (a, e)))
        .collect();
    let entries = pairs
        .par_iter()
        .map(|&(alpha, eps)| {
            let at_zero = sobolev_norm(&states[0].u, alpha + eps)?;
            let norms = near
                .iter()
                .map(|s| sobolev_norm(&s.u, alpha + eps))
                .collect::<Result<Vec<f64>>>()?;
            let norm_max = norms.iter().copied().fold(0.0, f64::max);
            let fit: Vec<(f64, f64)> = near
                .iter()
                .zip(&norms)
                .filter(|(_, n)| **n > 0.0)
                .map(|(s, n)| (s.t.ln(), n.ln()))
                .collect();
            let gevrey_max = match GevreyParams::new(phi.clone(), eps, alpha) {
                Ok(p) => near
                    .iter()
                    .map(|s| gevrey_norm(&s.u, &p))
                    .collect::<Result<Vec<f64>>>()
                    .ok()
                    .map(|v| v.into_iter().fold(0.0, f64::max)),
                Err(_) => None,
            };
            Ok(LossProbeEntry {
                alpha,
                eps,
                norm_at_zero: at_zero,
                norm_max,
                ratio: ratio(norm_max, at_zero),
                growth_exponent: least_squares_slope(&fit),
                gevrey_max,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut signature_alphas = Vec::new();
    for &alpha in alpha_grid {
        let mut rows = entries.iter().filter(|e| e.alpha == alpha).peekable();
        if rows.peek().is_some() && rows.all(|e| e.ratio > cfg.factor) {
            signature_alphas.push(alpha);
        }
    }
    Ok(LossProbeReport {
        signature: !signature_alphas.is_empty(),
        signature_alphas,
        entries,
        truncation: tr.spectrum().len(),
    })
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub truncation: usize,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementSignature {
    pub alpha: f64,
    pub eps: f64,
    pub rows: Vec<RefinementRow>,
    /// log-log slope of the max ratio against N; persistent growth under
    /// refinement is the finite-N shadow of derivative loss
    pub growth_in_n: Option<f64>,
}

/// Repeats the probe on runs at increasing truncations (typically N, 2N, 4N).
pub fn loss_refinement_signature(
    runs: &[Trajectory],
    phi: &FunctionSpec,
    alpha: f64,
    eps: f64,
    cfg: &LossProbeConfig,
) -> Result<RefinementSignature> {
    let rows = runs
        .iter()
        .map(|tr| {
            let rep = derivative_loss_probe(tr, phi, &[alpha], &[eps], cfg)?;
            Ok(RefinementRow {
                truncation: rep.truncation,
                max_ratio: rep.entries[0].ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.max_ratio.is_finite() && r.max_ratio > 0.0)
        .map(|r| ((r.truncation as f64).ln(), r.max_ratio.ln()))
        .collect();
    Ok(RefinementSignature {
        alpha,
        eps,
        growth_in_n: least_squares_slope(&pts),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependenceProblem {
    pub m: FunctionSpec,
    pub u0: SpectralVector,
    pub u1: SpectralVector,
}

impl DependenceProblem {
    fn initial_state(&self) -> Result<SpectralState> {
        SpectralState::new(0.0, self.u0.clone(), self.u1.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceRow {
    pub index: usize,
    /// energy-space distance of the data
    pub data_distance: f64,
    /// max over the check grid of `|m_n − m|`, when a grid is given
    pub m_distance: Option<f64>,
    /// sup over samples of the energy-space distance of the solutions
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub rows: Vec<DependenceRow>,
    /// shared ω-continuity constant estimate, when checked
    pub continuity_constant: Option<f64>,
}

/// ω-continuity check applied to every nonlinearity before integrating.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityCheck {
    pub omega: FunctionSpec,
    pub grid: Vec<f64>,
}

/// `sqrt(|A^{1/2}(u − ũ)|² + |u' − ũ'|²)`
pub fn energy_distance(a: &SpectralState, b: &SpectralState) -> Result<f64> {
    a.u.ensure_shared(&b.u)?;
    let lambdas = a.spectrum().lambdas();
    let mut acc = NeumaierSum::new();
    for (k, l) in lambdas.iter().enumerate() {
        let du = a.u.components()[k] - b.u.components()[k];
        let dv = a.v.components()[k] - b.v.components()[k];
        acc += l * l * du * du;
        acc += dv * dv;
    }
    Ok(acc.total().sqrt())
}

pub fn continuous_dependence_study(
    problems: &[DependenceProblem],
    limit: &DependenceProblem,
    check: Option<&ContinuityCheck>,
    cfg: &IntegratorConfig,
    t_end: f64,
) -> Result<DependenceReport> {
    let with_index = |index: usize| move |e: Error| Error::Problem { index, source: Box::new(e) };
    let continuity_constant = match check {
        Some(c) => {
            let mut l = estimate_continuity_constant(&limit.m, &c.omega, &c.grid)?.constant;
            for (i, p) in problems.iter().enumerate() {
                let est = estimate_continuity_constant(&p.m, &c.omega, &c.grid).map_err(with_index(i))?;
                l = l.max(est.constant);
            }
            Some(l)
        }
        None => None,
    };

    let reference = evolve(&limit.initial_state()?, &limit.m, cfg, t_end)?;
    if !reference.is_complete() {
        return Err(Error::InvalidArgument(format!(
            "limit problem did not complete: {:?}",
            reference.status
        )));
    }
    let rows = problems
        .par_iter()
        .enumerate()
        .map(|(index, p)| {
            let run = || -> Result<DependenceRow> {
                let init = p.initial_state()?;
                let tr = evolve(&init, &p.m, cfg, t_end)?;
                if tr.len() != reference.len() {
                    return Err(Error::InvalidArgument(format!("run stopped early: {:?}", tr.status)));
                }
                let mut deviation = 0.0f64;
                for (a, b) in tr.states().iter().zip(reference.states()) {
                    deviation = deviation.max(energy_distance(a, b)?);
                }
                let m_distance = check.map(|c| {
                    c.grid
                        .iter()
                        .map(|&s| (p.m.eval(s) - limit.m.eval(s)).abs())
                        .fold(0.0, f64::max)
                });
                Ok(DependenceRow {
                    index,
                    data_distance: energy_distance(&init, reference.initial())?,
                    m_distance,
                    deviation,
                })
            };
            run().map_err(with_index(index))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DependenceReport {
        rows,
        continuity_constant,
    })
}

/// Least-squares slope of `ln y` against `ln x` over the positive pairs.
pub fn fit_rate(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    least_squares_slope(&pts)
}
