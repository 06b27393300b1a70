//! Grid checks for continuity moduli and ω-continuity constants.
//!
//! Both operations are grid-based: they can refute an axiom or bound a
//! constant from below, never certify it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::FunctionSpec;

const REL_TOL: f64 = 1.0e-12;
const MAX_LISTED_VIOLATIONS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axiom", rename_all = "snake_case")]
pub enum ModulusViolation {
    NonzeroAtZero { value: f64 },
    Decreasing { a: f64, b: f64, omega_a: f64, omega_b: f64 },
    Superadditive { a: f64, b: f64, lhs: f64, rhs: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub zero_at_zero: bool,
    pub increasing: bool,
    pub subadditive: bool,
    /// first violations found, at most 64
    pub violations: Vec<ModulusViolation>,
    pub violation_count: usize,
    pub pairs_checked: usize,
}

impl ModulusReport {
    pub fn passed(&self) -> bool {
        self.zero_at_zero && self.increasing && self.subadditive
    }
}

fn validate_grid(grid: &[f64], min_len: usize) -> Result<()> {
    if grid.len() < min_len {
        return Err(Error::InvalidArgument(format!(
            "grid needs at least {min_len} points, found {}",
            grid.len()
        )));
    }
    if grid.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidArgument("grid points must be finite and ≥ 0".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("grid must be sorted".into()));
    }
    Ok(())
}

/// Checks `ω(0) = 0`, monotonicity along the grid and `ω(a + b) ≤ ω(a) + ω(b)`
/// for every grid pair with `a + b` inside the grid range.
pub fn verify_modulus_axioms(omega: &FunctionSpec, grid: &[f64]) -> Result<ModulusReport> {
    validate_grid(grid, 1)?;
    let values: Vec<f64> = grid.iter().map(|&s| omega.eval(s)).collect();
    let mut violations = Vec::new();
    let mut count = 0usize;
    let mut record = |v: ModulusViolation, count: &mut usize| {
        *count += 1;
        if violations.len() < MAX_LISTED_VIOLATIONS {
            violations.push(v);
        }
    };

    let at_zero = omega.eval(0.0);
    let zero_at_zero = at_zero == 0.0;
    if !zero_at_zero {
        record(ModulusViolation::NonzeroAtZero { value: at_zero }, &mut count);
    }

    let mut increasing = true;
    for i in 1..grid.len() {
        let (wa, wb) = (values[i - 1], values[i]);
        if !(wb >= wa - REL_TOL * wa.abs()) {
            increasing = false;
            record(
                ModulusViolation::Decreasing {
                    a: grid[i - 1],
                    b: grid[i],
                    omega_a: wa,
                    omega_b: wb,
                },
                &mut count,
            );
        }
    }

    let top = grid[grid.len() - 1];
    let mut subadditive = true;
    let mut pairs = 0usize;
    for i in 0..grid.len() {
        for j in i..grid.len() {
            let (a, b) = (grid[i], grid[j]);
            if a + b > top {
                break;
            }
            pairs += 1;
            let lhs = omega.eval(a + b);
            let rhs = values[i] + values[j];
            if !(lhs <= rhs + REL_TOL * rhs.abs()) {
                subadditive = false;
                record(ModulusViolation::Superadditive { a, b, lhs, rhs }, &mut count);
            }
        }
    }

    Ok(ModulusReport {
        zero_at_zero,
        increasing,
        subadditive,
        violations,
        violation_count: count,
        pairs_checked: pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityEstimate {
    /// `max |m(a) − m(b)| / ω(|a − b|)` over grid pairs; a lower bound for
    /// the true constant.
    pub constant: f64,
    pub attained_at: Option<(f64, f64)>,
    pub pairs_checked: usize,
}

pub fn estimate_continuity_constant(
    m: &FunctionSpec,
    omega: &FunctionSpec,
    grid: &[f64],
) -> Result<ContinuityEstimate> {
    validate_grid(grid, 2)?;
    let values: Vec<f64> = grid.iter().map(|&s| m.eval(s)).collect();
    let mut best = 0.0f64;
    let mut at = None;
    let mut pairs = 0usize;
    for i in 0..grid.len() {
        for j in (i + 1)..grid.len() {
            pairs += 1;
            let diff = (values[j] - values[i]).abs();
            let w = omega.eval(grid[j] - grid[i]);
            if w == 0.0 {
                if diff != 0.0 {
                    return Err(Error::NotOmegaContinuous {
                        a: grid[i],
                        b: grid[j],
                    });
                }
                continue;
            }
            let ratio = diff / w;
            if ratio > best {
                best = ratio;
                at = Some((grid[i], grid[j]));
            }
        }
    }
    Ok(ContinuityEstimate {
        constant: best,
        attained_at: at,
        pairs_checked: pairs,
    })
}
