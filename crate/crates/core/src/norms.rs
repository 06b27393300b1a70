//! Sobolev and generalized Gevrey norms on a discrete spectrum.
//!
//! `|||u|||²_{φ,r,α} = Σ_k λ_k^{4α} u_k² exp(r φ(λ_k))`. Each term is formed
//! directly when representable; the exponent `4α log λ_k + 2 log|u_k| + r φ(λ_k)`
//! is always computed first and compared with a cap so that overflow is
//! reported with the offending mode instead of producing infinities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::FunctionSpec;
use crate::spectrum::SpectralVector;
use crate::summation::NeumaierSum;

pub const DEFAULT_EXPONENT_CAP: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GevreyParams {
    pub phi: FunctionSpec,
    /// scale radius `r ≥ 0`
    pub r: f64,
    /// Sobolev exponent `α ≥ 0`
    pub alpha: f64,
}

impl GevreyParams {
    pub fn new(phi: FunctionSpec, r: f64, alpha: f64) -> Result<Self> {
        let p = GevreyParams { phi, r, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r.is_finite() && self.r >= 0.0) {
            return Err(Error::InvalidArgument(format!("radius r = {} must be ≥ 0", self.r)));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "exponent α = {} must be ≥ 0",
                self.alpha
            )));
        }
        self.phi.validate()
    }
}

/// Exponent of a single term, or `None` when the term vanishes identically.
pub(crate) fn term_exponent(lambda: f64, u: f64, alpha: f64, extra: f64) -> Option<f64> {
    if u == 0.0 {
        return None;
    }
    let sobolev = if alpha == 0.0 {
        0.0
    } else if lambda == 0.0 {
        return None;
    } else {
        4.0 * alpha * lambda.ln()
    };
    Some(sobolev + 2.0 * u.abs().ln() + extra)
}

/// `λ^{4α} u² exp(extra)`, evaluated directly and falling back to the
/// exponent form when a factor is not representable on its own.
pub(crate) fn term_value(lambda: f64, u: f64, alpha: f64, extra: f64, exponent: f64) -> f64 {
    let direct = lambda.powf(4.0 * alpha) * u * u * if extra == 0.0 { 1.0 } else { extra.exp() };
    if direct.is_finite() && (direct > 0.0 || exponent < -700.0) {
        direct
    } else {
        exponent.exp()
    }
}

/// Sum of `λ_k^{4α} u_k² exp(extra(k, λ_k))` over the modes for which
/// `extra` returns a value.
pub(crate) fn weighted_sum<F>(u: &SpectralVector, alpha: f64, cap: f64, extra: F) -> Result<f64>
where
    F: Fn(usize, f64) -> Option<f64>,
{
    let lambdas = u.spectrum().lambdas();
    let mut acc = NeumaierSum::new();
    let mut worst: Option<(usize, f64)> = None;
    for (k, (&lambda, &x)) in lambdas.iter().zip(u.components()).enumerate() {
        let Some(extra) = extra(k, lambda) else { continue };
        if extra.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "weight exponent is NaN at λ = {lambda}"
            )));
        }
        let Some(exponent) = term_exponent(lambda, x, alpha, extra) else {
            continue;
        };
        if exponent > cap {
            return Err(Error::NormOverflow { k: k + 1, exponent });
        }
        if worst.is_none_or(|(_, e)| exponent > e) {
            worst = Some((k + 1, exponent));
        }
        acc += term_value(lambda, x, alpha, extra, exponent);
    }
    let total = acc.total();
    if !total.is_finite() {
        let (k, exponent) = worst.unwrap_or((0, f64::INFINITY));
        return Err(Error::NormOverflow { k, exponent });
    }
    Ok(total)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("exponent α = {alpha} must be ≥ 0")))
    }
}

/// `|A^α u| = sqrt(Σ λ_k^{4α} u_k²)`
pub fn sobolev_norm(u: &SpectralVector, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    weighted_sum(u, alpha, DEFAULT_EXPONENT_CAP, |_, _| Some(0.0)).map(f64::sqrt)
}

pub fn gevrey_norm(u: &SpectralVector, p: &GevreyParams) -> Result<f64> {
    gevrey_norm_capped(u, p, DEFAULT_EXPONENT_CAP)
}

/// [`gevrey_norm`] with an explicit cap on term exponents.
pub fn gevrey_norm_capped(u: &SpectralVector, p: &GevreyParams, cap: f64) -> Result<f64> {
    p.validate()?;
    let r = p.r;
    weighted_sum(u, p.alpha, cap, |_, lambda| {
        Some(if r == 0.0 { 0.0 } else { r * p.phi.eval(lambda) })
    })
    .map(f64::sqrt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::Spectrum;
    use std::sync::Arc;

    fn vector(lambdas: &[f64], comps: &[f64]) -> SpectralVector {
        let s = Arc::new(Spectrum::new(lambdas.to_vec()).unwrap());
        SpectralVector::new(s, comps.to_vec()).unwrap()
    }

    #[test]
    fn single_term_gevrey() {
        let u = vector(&[1.0], &[1.0]);
        let p = GevreyParams::new(FunctionSpec::constant(1.0), 1.0, 0.0).unwrap();
        let n = gevrey_norm(&u, &p).unwrap();
        assert!((n - 0.5f64.exp()).abs() < 1e-15);
        assert!((n - 1.648721).abs() < 1e-6);
    }

    #[test]
    fn zero_vector_has_zero_norm() {
        let u = vector(&[0.0, 1.0, 5.0], &[0.0, 0.0, 0.0]);
        let p = GevreyParams::new(FunctionSpec::power(1.0), 3.0, 2.0).unwrap();
        assert_eq!(gevrey_norm(&u, &p).unwrap(), 0.0);
        assert_eq!(sobolev_norm(&u, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn three_mode_gevrey_against_extended_precision() {
        // 40-digit reference: 1.40320020794476549413615289027988148897
        let u = vector(&[1.0, 2.0, 3.0], &[1.0, 0.5, 0.25]);
        let p = GevreyParams::new(FunctionSpec::power(1.0), 0.1, 0.25).unwrap();
        let n = gevrey_norm(&u, &p).unwrap();
        assert!((n - 1.403_200_207_944_765_5).abs() < 4e-16);
    }

    #[test]
    fn sobolev_examples() {
        let u = vector(&[3.0, 4.0], &[3.0, 4.0]);
        assert_eq!(sobolev_norm(&u, 0.0).unwrap(), 5.0);
        let u = vector(&[2.0], &[1.0]);
        assert!((sobolev_norm(&u, 0.5).unwrap() - 2.0).abs() < 1e-15);
        let u = vector(&[1.0, 2.0], &[1.0, 1.0]);
        assert!((sobolev_norm(&u, 0.25).unwrap() - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_eigenvalue_with_zero_alpha_counts() {
        let u = vector(&[0.0, 1.0], &[1.0, 0.0]);
        assert_eq!(sobolev_norm(&u, 0.0).unwrap(), 1.0);
        assert_eq!(sobolev_norm(&u, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn overflow_names_the_mode() {
        let u = vector(&[1.0, 10.0, 1000.0], &[1.0, 1.0, 1.0]);
        let p = GevreyParams::new(FunctionSpec::power(1.0), 1.0, 0.0).unwrap();
        match gevrey_norm(&u, &p) {
            Err(Error::NormOverflow { k, exponent }) => {
                assert_eq!(k, 3);
                assert!((exponent - 1000.0).abs() < 1e-9);
            }
            other => panic!("expected overflow, got {other:?}"),
        }
        // a configurable cap
        assert!(gevrey_norm_capped(&u, &p, 2000.0).is_err());
        let u = vector(&[1.0, 10.0, 600.0], &[1.0, 1.0, 1.0]);
        assert!(gevrey_norm(&u, &p).is_ok());
    }

    #[test]
    fn tiny_components_survive_large_weights() {
        // λ^{4α} overflows on its own, the full term does not
        let u = vector(&[1.0e100], &[1.0e-150]);
        let n = sobolev_norm(&u, 1.0).unwrap();
        let expected = (4.0 * 1.0e100f64.ln() + 2.0 * 1.0e-150f64.ln()).exp().sqrt();
        assert!((n / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(GevreyParams::new(FunctionSpec::constant(1.0), -1.0, 0.0).is_err());
        assert!(GevreyParams::new(FunctionSpec::constant(1.0), 1.0, -0.5).is_err());
    }
}
