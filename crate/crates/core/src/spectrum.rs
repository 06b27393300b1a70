//! Discrete spectral representation of `(H, A)`.
//!
//! `A` is represented by the square roots `λ_k ≥ 0` of its eigenvalues and
//! acts on component vectors by multiplication with `λ_k²`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::summation::NeumaierSum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Spectrum {
    lambdas: Vec<f64>,
}

impl Spectrum {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidSpectrum("at least one mode is required".into()));
        }
        if let Some(k) = lambdas.iter().position(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::InvalidSpectrum(format!(
                "λ_{} = {} is not a finite nonnegative number",
                k + 1,
                lambdas[k]
            )));
        }
        if let Some(k) = lambdas.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::InvalidSpectrum(format!(
                "λ must be nondecreasing (λ_{} > λ_{})",
                k + 1,
                k + 2
            )));
        }
        Ok(Spectrum { lambdas })
    }

    /// `λ_k = k^p` for `k = 1..=n`.
    pub fn powers(n: usize, p: f64) -> Result<Self> {
        Self::new((1..=n).map(|k| (k as f64).powf(p)).collect())
    }

    pub fn shared(self) -> Arc<Spectrum> {
        Arc::new(self)
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambdas[self.lambdas.len() - 1]
    }
}

impl TryFrom<Vec<f64>> for Spectrum {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Spectrum::new(v)
    }
}

impl From<Spectrum> for Vec<f64> {
    fn from(s: Spectrum) -> Self {
        s.lambdas
    }
}

/// Components `u_k` of a vector of `H`, tied to the spectrum they expand in.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVector {
    spectrum: Arc<Spectrum>,
    components: Vec<f64>,
}

impl SpectralVector {
    pub fn new(spectrum: Arc<Spectrum>, components: Vec<f64>) -> Result<Self> {
        if components.len() != spectrum.len() {
            return Err(Error::DimensionMismatch {
                expected: spectrum.len(),
                found: components.len(),
            });
        }
        Ok(SpectralVector {
            spectrum,
            components,
        })
    }

    pub fn zeros(spectrum: Arc<Spectrum>) -> Self {
        let n = spectrum.len();
        SpectralVector {
            spectrum,
            components: vec![0.0; n],
        }
    }

    /// Basis vector `e_{k+1}` (zero-based `k`).
    pub fn unit(spectrum: Arc<Spectrum>, k: usize) -> Result<Self> {
        let mut v = Self::zeros(spectrum);
        let n = v.components.len();
        *v.components.get_mut(k).ok_or(Error::DimensionMismatch {
            expected: n,
            found: k + 1,
        })? = 1.0;
        Ok(v)
    }

    pub fn from_fn(spectrum: Arc<Spectrum>, f: impl Fn(usize, f64) -> f64) -> Self {
        let components = spectrum
            .lambdas()
            .iter()
            .enumerate()
            .map(|(k, &l)| f(k, l))
            .collect();
        SpectralVector {
            spectrum,
            components,
        }
    }

    pub fn spectrum(&self) -> &Arc<Spectrum> {
        &self.spectrum
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn into_components(self) -> Vec<f64> {
        self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        SpectralVector {
            spectrum: self.spectrum.clone(),
            components: self.components.iter().map(|x| c * x).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|x| *x == 0.0)
    }

    pub fn shares_spectrum(&self, other: &SpectralVector) -> bool {
        Arc::ptr_eq(&self.spectrum, &other.spectrum) || self.spectrum == other.spectrum
    }

    pub fn ensure_shared(&self, other: &SpectralVector) -> Result<()> {
        if self.shares_spectrum(other) {
            Ok(())
        } else {
            Err(Error::SpectrumMismatch)
        }
    }

    /// `Σ λ_k^{2p} u_k²`, i.e. `|A^{p/2} u|²` (compensated, index order).
    pub fn weighted_square(&self, p: i32) -> f64 {
        weighted_square(self.spectrum.lambdas(), &self.components, p)
    }

    /// `|A^{1/2} u|² = Σ λ_k² u_k²`
    pub fn energy_sigma(&self) -> f64 {
        self.weighted_square(1)
    }

    /// `Σ λ_k^{2p} u_k v_k`
    pub fn weighted_dot(&self, other: &SpectralVector, p: i32) -> f64 {
        weighted_dot(self.spectrum.lambdas(), &self.components, &other.components, p)
    }
}

pub(crate) fn weighted_square(lambdas: &[f64], u: &[f64], p: i32) -> f64 {
    let mut acc = NeumaierSum::new();
    for (l, x) in lambdas.iter().zip(u) {
        acc += l.powi(2 * p) * x * x;
    }
    acc.total()
}

pub(crate) fn weighted_dot(lambdas: &[f64], u: &[f64], v: &[f64], p: i32) -> f64 {
    let mut acc = NeumaierSum::new();
    for ((l, x), y) in lambdas.iter().zip(u).zip(v) {
        acc += l.powi(2 * p) * x * y;
    }
    acc.total()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_spectra() {
        assert!(Spectrum::new(vec![]).is_err());
        assert!(Spectrum::new(vec![2.0, 1.0]).is_err());
        assert!(Spectrum::new(vec![-1.0]).is_err());
        assert!(Spectrum::new(vec![f64::NAN]).is_err());
        assert!(Spectrum::new(vec![0.0, 1.0, 1.0]).is_ok());
    }

    #[test]
    fn power_generator() {
        let s = Spectrum::powers(4, 2.0).unwrap();
        assert_eq!(s.lambdas(), &[1.0, 4.0, 9.0, 16.0]);
    }

    #[test]
    fn vector_length_must_match() {
        let s = Spectrum::powers(3, 1.0).unwrap().shared();
        assert!(SpectralVector::new(s.clone(), vec![1.0, 2.0]).is_err());
        assert!(SpectralVector::unit(s, 3).is_err());
    }

    #[test]
    fn energy_sigma_weights_by_eigenvalue() {
        let s = Spectrum::new(vec![1.0, 2.0]).unwrap().shared();
        let u = SpectralVector::new(s, vec![1.0, 0.5]).unwrap();
        assert_eq!(u.energy_sigma(), 2.0);
        assert_eq!(u.weighted_square(2), 1.0 + 16.0 * 0.25);
    }

    #[test]
    fn spectrum_serde_validates() {
        let bad: Result<Spectrum, _> = serde_json::from_str("[2.0, 1.0]");
        assert!(bad.is_err());
    }
}
