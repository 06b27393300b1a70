//! Compatibility between the modulus ω of `m` and the weight φ of the data
//! space, in the strictly and weakly hyperbolic regimes.
//!
//! For each grid point the ratio
//!
//! * strict: `σ ω(1/σ) / φ(σ)`
//! * weak:   `σ / φ(σ / sqrt(ω(1/σ)))`
//!
//! is evaluated. `Λ` is its grid maximum. On a finite grid `Λ` is always
//! finite, so a pair is only accepted when the ratio also levels off at the
//! top of the grid: the least-squares slope of `log ratio` against `log σ`
//! over the last decade must not exceed [`TAIL_SLOPE_TOLERANCE`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::FunctionSpec;

pub const DEFAULT_POINTS_PER_DECADE: usize = 512;
pub const DEFAULT_GRID_LOW: f64 = 1.0e-6;
pub const DEFAULT_GRID_HIGH: f64 = 1.0e6;
/// Largest upper-tail log-log slope still read as "bounded".
pub const TAIL_SLOPE_TOLERANCE: f64 = 1.0e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperbolicMode {
    Strict,
    Weak,
}

impl std::str::FromStr for HyperbolicMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(HyperbolicMode::Strict),
            "weak" => Ok(HyperbolicMode::Weak),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub mode: HyperbolicMode,
    /// grid maximum of the ratio (Λ)
    pub lambda_estimate: f64,
    pub worst_sigma: f64,
    /// least-squares slope of log ratio vs log σ over the top decade
    pub tail_slope: f64,
    pub pass: bool,
    pub samples: usize,
}

/// `per_decade` log-uniform points per decade on `[lo, hi]`, endpoints
/// included. Points are `lo · 10^{i/per_decade}`.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || per_decade == 0 {
        return Err(Error::InvalidArgument(format!(
            "log grid needs 0 < lo < hi and a positive density (lo={lo}, hi={hi})"
        )));
    }
    let decades = (hi / lo).log10();
    let steps = (decades * per_decade as f64).round().max(1.0) as usize;
    let (llo, lhi) = (lo.log10(), hi.log10());
    Ok((0..=steps)
        .map(|i| {
            if i == steps {
                hi
            } else {
                10f64.powf(llo + (lhi - llo) * i as f64 / steps as f64)
            }
        })
        .collect())
}

/// The default condition grid `[1e-6, 1e6]` with 512 points per decade.
pub fn default_condition_grid() -> Vec<f64> {
    log_grid(DEFAULT_GRID_LOW, DEFAULT_GRID_HIGH, DEFAULT_POINTS_PER_DECADE)
        .expect("default grid parameters are valid")
}

fn weight(phi: &FunctionSpec, x: f64) -> Result<f64> {
    let value = phi.eval(x);
    if value < 1.0 || value.is_nan() {
        return Err(Error::InvalidWeight { sigma: x, value });
    }
    Ok(value)
}

/// The ratio whose supremum over σ > 0 is the constant Λ.
pub fn condition_ratio(
    omega: &FunctionSpec,
    phi: &FunctionSpec,
    mode: HyperbolicMode,
    sigma: f64,
) -> Result<f64> {
    let w = omega.eval(1.0 / sigma);
    Ok(match mode {
        HyperbolicMode::Strict => sigma * w / weight(phi, sigma)?,
        HyperbolicMode::Weak => sigma / weight(phi, sigma / w.sqrt())?,
    })
}

pub fn check_phi_condition(
    omega: &FunctionSpec,
    phi: &FunctionSpec,
    mode: HyperbolicMode,
    grid: &[f64],
) -> Result<ConditionReport> {
    if grid.is_empty() || grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidArgument(
            "condition grid must be nonempty with finite positive points".into(),
        ));
    }
    let ratios = grid
        .iter()
        .map(|&s| condition_ratio(omega, phi, mode, s))
        .collect::<Result<Vec<f64>>>()?;

    let mut lambda = f64::NEG_INFINITY;
    let mut worst = grid[0];
    let mut finite = true;
    for (&s, &q) in grid.iter().zip(&ratios) {
        if !q.is_finite() {
            finite = false;
            lambda = f64::INFINITY;
            worst = s;
            break;
        }
        if q > lambda {
            lambda = q;
            worst = s;
        }
    }

    let tail_slope = if finite { upper_tail_slope(grid, &ratios) } else { f64::INFINITY };
    Ok(ConditionReport {
        mode,
        lambda_estimate: lambda,
        worst_sigma: worst,
        tail_slope,
        pass: finite && tail_slope <= TAIL_SLOPE_TOLERANCE,
        samples: grid.len(),
    })
}

fn upper_tail_slope(grid: &[f64], ratios: &[f64]) -> f64 {
    let top = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pts: Vec<(f64, f64)> = grid
        .iter()
        .zip(ratios)
        .filter(|(s, q)| **s >= top / 10.0 && **q > 0.0)
        .map(|(s, q)| (s.ln(), q.ln()))
        .collect();
    least_squares_slope(&pts).unwrap_or(0.0)
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_hits_decades() {
        let g = log_grid(1e-2, 1e2, 4).unwrap();
        assert_eq!(g.len(), 17);
        assert_eq!(g[0], 1e-2);
        assert_eq!(g[8], 1.0);
        assert_eq!(g[16], 1e2);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn default_grid_size() {
        assert_eq!(default_condition_grid().len(), 12 * 512 + 1);
    }

    #[test]
    fn lipschitz_with_constant_weight() {
        let omega = FunctionSpec::power(1.0);
        let phi = FunctionSpec::constant(1.0);
        let r = check_phi_condition(&omega, &phi, HyperbolicMode::Strict, &default_condition_grid())
            .unwrap();
        assert!(r.pass);
        assert!((r.lambda_estimate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weight_below_one_is_rejected() {
        let r = check_phi_condition(
            &FunctionSpec::power(1.0),
            &FunctionSpec::constant(0.5),
            HyperbolicMode::Strict,
            &[1.0],
        );
        assert!(matches!(r, Err(Error::InvalidWeight { .. })));
    }

    #[test]
    fn growing_ratio_fails() {
        // σ ω(1/σ)/φ = σ for ω = σ^0 ... use ω ≡ 1 (not a modulus, but a clean divergence)
        let r = check_phi_condition(
            &FunctionSpec::constant(1.0),
            &FunctionSpec::constant(1.0),
            HyperbolicMode::Strict,
            &default_condition_grid(),
        )
        .unwrap();
        assert!(!r.pass);
        assert!((r.tail_slope - 1.0).abs() < 1e-9);
        assert_eq!(r.worst_sigma, 1e6);
    }

    #[test]
    fn mode_parses() {
        assert_eq!("weak".parse::<HyperbolicMode>().unwrap(), HyperbolicMode::Weak);
        assert!("other".parse::<HyperbolicMode>().is_err());
    }
}
