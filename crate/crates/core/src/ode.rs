//! Dormand–Prince 5(4) embedded explicit Runge–Kutta pair with adaptive step
//! control.
//!
//! Output is produced at caller-supplied times; steps are shortened to land on
//! each output time exactly, so samples carry no interpolation error. The
//! controller keeps its own proposal across such shortened steps.
//!
//! Errors are measured in the max norm, `max_i |err_i| / (atol + rtol·max(|y_i|, |ŷ_i|))`,
//! which makes components that stay identically zero invisible to the step
//! control.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const METHOD_NAME: &str = "dopri5";

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// largest step magnitude; infinite for no limit
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            max_step: f64::INFINITY,
            max_steps: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
    pub rhs_evals: u64,
}

/// Returned by an output observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    /// the observer asked to stop at this output time
    Stopped { t: f64 },
    StepUnderflow { t: f64 },
    TooManySteps { t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub termination: Termination,
    pub stats: StepStats,
    pub t: f64,
    pub y: Vec<f64>,
}

struct Work {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Work {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
        }
    }
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], cfg: &SolverConfig) -> f64 {
    y.iter()
        .zip(y_new)
        .zip(err)
        .map(|((a, b), e)| e.abs() / (cfg.abs_tol + cfg.rel_tol * a.abs().max(b.abs())))
        .fold(0.0, f64::max)
}

fn initial_step<S: OdeSystem>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    dir: f64,
    cfg: &SolverConfig,
    stats: &mut StepStats,
) -> Result<f64> {
    let scale: Vec<f64> = y0.iter().map(|y| cfg.abs_tol + cfg.rel_tol * y.abs()).collect();
    let d0 = y0.iter().zip(&scale).map(|(y, s)| (y / s).abs()).fold(0.0, f64::max);
    let d1 = f0.iter().zip(&scale).map(|(f, s)| (f / s).abs()).fold(0.0, f64::max);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(cfg.max_step);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + dir * h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    sys.rhs(t0 + dir * h0, &y1, &mut f1)?;
    stats.rhs_evals += 1;
    let d2 = f1
        .iter()
        .zip(f0)
        .zip(&scale)
        .map(|((a, b), s)| ((a - b) / s).abs())
        .fold(0.0, f64::max)
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    Ok((100.0 * h0).min(h1).min(cfg.max_step))
}

/// Integrates from `t0` towards `t_end`, calling `observer` at `t0` and at each
/// time in `outputs` (which must be monotone in the direction of integration
/// and lie between `t0` and `t_end`).
pub fn integrate<S, O>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    outputs: &[f64],
    cfg: &SolverConfig,
    mut observer: O,
) -> Result<Outcome>
where
    S: OdeSystem,
    O: FnMut(f64, &[f64]) -> Result<Control>,
{
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y0.len(),
        });
    }
    if !(cfg.rel_tol > 0.0 && cfg.abs_tol > 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    if !(cfg.max_step > 0.0) {
        return Err(Error::InvalidArgument("max_step must be positive".into()));
    }
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    if outputs
        .windows(2)
        .any(|w| dir * (w[1] - w[0]) < 0.0)
        || outputs.iter().any(|&t| dir * (t - t0) < 0.0 || dir * (t - t_end) > 0.0)
    {
        return Err(Error::InvalidArgument(
            "output times must be monotone and inside the integration span".into(),
        ));
    }

    let mut stats = StepStats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut w = Work::new(n);
    let done = |termination, stats, t, y| {
        Ok(Outcome {
            termination,
            stats,
            t,
            y,
        })
    };

    if observer(t, &y)? == Control::Stop {
        return done(Termination::Stopped { t }, stats, t, y);
    }
    let mut next_out = outputs.iter().position(|&o| dir * (o - t0) > 0.0).unwrap_or(outputs.len());
    if t0 == t_end {
        return done(Termination::Completed, stats, t, y);
    }

    sys.rhs(t, &y, &mut w.k[0])?;
    stats.rhs_evals += 1;
    let mut h = initial_step(sys, t, &y, &w.k[0].clone(), dir, cfg, &mut stats)?;
    let mut steps = 0usize;

    loop {
        if steps >= cfg.max_steps {
            return done(Termination::TooManySteps { t }, stats, t, y);
        }
        let target = if next_out < outputs.len() { outputs[next_out] } else { t_end };
        let remaining = (target - t).abs();
        let mut lands = false;
        let mut step = h.min(cfg.max_step);
        if step >= remaining * (1.0 - 1e-12) {
            step = remaining;
            lands = true;
        }
        if step <= 16.0 * f64::EPSILON * t.abs().max(1.0) && !lands {
            return done(Termination::StepUnderflow { t }, stats, t, y);
        }
        let hs = dir * step;

        // stages
        let stage = |coef: &[(usize, f64)], k: &[Vec<f64>; 7], y: &[f64], out: &mut Vec<f64>| {
            for i in 0..n {
                let mut acc = 0.0;
                for &(j, a) in coef {
                    acc += a * k[j][i];
                }
                out[i] = y[i] + hs * acc;
            }
        };
        let k = &mut w.k;
        stage(&[(0, A21)], k, &y, &mut w.tmp);
        sys.rhs(t + C2 * hs, &w.tmp, &mut k[1])?;
        stage(&[(0, A31), (1, A32)], k, &y, &mut w.tmp);
        sys.rhs(t + C3 * hs, &w.tmp, &mut k[2])?;
        stage(&[(0, A41), (1, A42), (2, A43)], k, &y, &mut w.tmp);
        sys.rhs(t + C4 * hs, &w.tmp, &mut k[3])?;
        stage(&[(0, A51), (1, A52), (2, A53), (3, A54)], k, &y, &mut w.tmp);
        sys.rhs(t + C5 * hs, &w.tmp, &mut k[4])?;
        stage(&[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], k, &y, &mut w.tmp);
        sys.rhs(t + hs, &w.tmp, &mut k[5])?;
        stage(&[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)], k, &y, &mut w.y_new);
        let t_new = if lands { target } else { t + hs };
        sys.rhs(t_new, &w.y_new, &mut k[6])?;
        stats.rhs_evals += 6;

        for i in 0..n {
            w.tmp[i] = hs
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                    + E7 * k[6][i]);
        }
        let err = error_norm(&y, &w.y_new, &w.tmp, cfg);
        steps += 1;

        if err <= 1.0 && err.is_finite() {
            stats.accepted += 1;
            t = t_new;
            std::mem::swap(&mut y, &mut w.y_new);
            w.k.swap(0, 6); // first-same-as-last
            let fac = if err == 0.0 { FAC_MAX } else { (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX) };
            // a shortened landing step does not shrink the proposal
            h = if lands { h.max(step * fac) } else { step * fac };
            if lands {
                if next_out < outputs.len() {
                    let reached = outputs[next_out];
                    next_out += 1;
                    // repeated output times are reported once each
                    let mut ctrl = observer(t, &y)?;
                    while ctrl == Control::Continue
                        && next_out < outputs.len()
                        && outputs[next_out] == reached
                    {
                        next_out += 1;
                        ctrl = observer(t, &y)?;
                    }
                    if ctrl == Control::Stop {
                        return done(Termination::Stopped { t }, stats, t, y);
                    }
                    if t == t_end && next_out >= outputs.len() {
                        return done(Termination::Completed, stats, t, y);
                    }
                } else {
                    return done(Termination::Completed, stats, t, y);
                }
            }
        } else {
            stats.rejected += 1;
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0)
            } else {
                FAC_MIN
            };
            h = step * fac;
        }
    }
}
