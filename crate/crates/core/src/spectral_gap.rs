//! Gevrey–Manfrin tail conditions and the splitting of data into two
//! "spectral gap" pieces.
//!
//! `u ∈ 𝓖𝓜^{(β)}_{φ,{ρ_n},α}` when for every n
//!
//! ```text
//! Σ_{λ_k > ρ_n} λ_k^{4α} u_k² exp(ρ_n^β φ(λ_k)) ≤ ρ_n.
//! ```
//!
//! With a finite ρ list the unbounded-sequence requirement becomes
//! `ρ_last ≥` the largest eigenvalue carrying a nonzero component.
//!
//! A decomposition splits the spectrum at breakpoints `s_0 < s_1 < …`:
//! `ū` keeps the components on `[s_{2n}, s_{2n+1})`, `û` the rest, i.e.
//! `[0, s_0)` and `[s_{2n+1}, s_{2n+2})`. Above `ρ = s_{2n+1}` the first
//! component of `ū` sits at `s_{2n+2}` or later, so `ū` is tested against
//! `ρ̄ = (s_1, s_3, …)` and `û` against `ρ̂ = (s_0, s_2, …)`.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::FunctionSpec;
use crate::norms::{gevrey_norm, weighted_sum, GevreyParams, DEFAULT_EXPONENT_CAP};
use crate::spectrum::SpectralVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GMParams {
    pub phi: FunctionSpec,
    pub rhos: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
}

impl GMParams {
    pub fn new(phi: FunctionSpec, rhos: Vec<f64>, alpha: f64, beta: f64) -> Result<Self> {
        let p = GMParams { phi, rhos, alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.phi.validate()?;
        if self.rhos.is_empty() {
            return Err(Error::InvalidArgument("ρ sequence must be nonempty".into()));
        }
        if self.rhos.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidArgument("ρ values must be positive and finite".into()));
        }
        if self.rhos.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("ρ sequence must be strictly increasing".into()));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return Err(Error::InvalidArgument("α and β must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GMReport {
    pub member: bool,
    /// `ρ_n − tail_n`; `-inf` where a tail term overflows
    pub margins: Vec<f64>,
    /// `ρ_last ≥ max{λ_k : u_k ≠ 0}`
    pub covers_support: bool,
}

fn support_max(u: &SpectralVector) -> f64 {
    u.spectrum()
        .lambdas()
        .iter()
        .zip(u.components())
        .filter(|(_, x)| **x != 0.0)
        .map(|(l, _)| *l)
        .fold(0.0, f64::max)
}

/// `Σ_{λ_k ≥ from (or > from)} λ^{4α} u² exp(ρ^β φ(λ))`, `None` on overflow.
fn tail(u: &SpectralVector, phi: &FunctionSpec, alpha: f64, rho_pow: f64, from: f64, strict: bool) -> Result<Option<f64>> {
    let res = weighted_sum(u, alpha, DEFAULT_EXPONENT_CAP, |_, lambda| {
        let inside = if strict { lambda > from } else { lambda >= from };
        inside.then(|| rho_pow * phi.eval(lambda))
    });
    match res {
        Ok(v) => Ok(Some(v)),
        Err(Error::NormOverflow { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn gm_membership(u: &SpectralVector, p: &GMParams) -> Result<GMReport> {
    p.validate()?;
    let margins = p
        .rhos
        .iter()
        .map(|&rho| {
            Ok(match tail(u, &p.phi, p.alpha, rho.powf(p.beta), rho, true)? {
                Some(t) => rho - t,
                None => f64::NEG_INFINITY,
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let covers_support = p.rhos[p.rhos.len() - 1] >= support_max(u);
    Ok(GMReport {
        member: covers_support && margins.iter().all(|m| *m >= 0.0),
        margins,
        covers_support,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub bar_u0: SpectralVector,
    pub bar_u1: SpectralVector,
    pub hat_u0: SpectralVector,
    pub hat_u1: SpectralVector,
    /// breakpoints `s_0 < s_1 < …`
    pub breakpoints: Vec<f64>,
    /// the bands `[s_{2n}, s_{2n+1})` carried by `ū`
    pub bands: Vec<(f64, f64)>,
    pub rho_bar: Vec<f64>,
    pub rho_hat: Vec<f64>,
}

impl Decomposition {
    /// `(ū₀ + û₀, ū₁ + û₁)`
    pub fn reconstruct(&self) -> (Vec<f64>, Vec<f64>) {
        let add = |a: &SpectralVector, b: &SpectralVector| {
            a.components().iter().zip(b.components()).map(|(x, y)| x + y).collect()
        };
        (add(&self.bar_u0, &self.hat_u0), add(&self.bar_u1, &self.hat_u1))
    }

    /// No mode carries a nonzero component in both parts.
    pub fn supports_disjoint(&self) -> bool {
        let bar = self.bar_u0.components().iter().zip(self.bar_u1.components());
        let hat = self.hat_u0.components().iter().zip(self.hat_u1.components());
        bar.zip(hat)
            .all(|((a0, a1), (b0, b1))| (*a0 == 0.0 && *a1 == 0.0) || (*b0 == 0.0 && *b1 == 0.0))
    }

    pub fn part_params(&self, phi: &FunctionSpec, alpha: f64, beta: f64) -> Result<[GMParams; 4]> {
        Ok([
            GMParams::new(phi.clone(), self.rho_bar.clone(), alpha + 0.5, beta)?,
            GMParams::new(phi.clone(), self.rho_bar.clone(), alpha, beta)?,
            GMParams::new(phi.clone(), self.rho_hat.clone(), alpha + 0.5, beta)?,
            GMParams::new(phi.clone(), self.rho_hat.clone(), alpha, beta)?,
        ])
    }

    /// Membership of `(ū₀, ū₁, û₀, û₁)` at exponents `(α+1/2, α, α+1/2, α)`.
    pub fn membership(&self, phi: &FunctionSpec, alpha: f64, beta: f64) -> Result<[GMReport; 4]> {
        let [a, b, c, d] = self.part_params(phi, alpha, beta)?;
        Ok([
            gm_membership(&self.bar_u0, &a)?,
            gm_membership(&self.bar_u1, &b)?,
            gm_membership(&self.hat_u0, &c)?,
            gm_membership(&self.hat_u1, &d)?,
        ])
    }
}

/// Band index of `λ`: `-1` below `s_0`, otherwise the `j` with
/// `s_j ≤ λ < s_{j+1}` (the last band is unbounded).
fn band_of(lambda: f64, s: &[f64]) -> isize {
    s.partition_point(|&x| x <= lambda) as isize - 1
}

/// Splits `(u0, u1)` at the given breakpoints (at least two, strictly
/// increasing). Components are copied, so `ū + û = u` exactly.
pub fn split_by_bands(u0: &SpectralVector, u1: &SpectralVector, s: &[f64]) -> Result<Decomposition> {
    u0.ensure_shared(u1)?;
    if s.len() < 2 || s.windows(2).any(|w| !(w[1] > w[0])) || !(s[0] > 0.0) {
        return Err(Error::InvalidArgument(
            "breakpoints must be at least two strictly increasing positive values".into(),
        ));
    }
    let spectrum = u0.spectrum().clone();
    let n = spectrum.len();
    let mut parts = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (k, &lambda) in spectrum.lambdas().iter().enumerate() {
        let band = band_of(lambda, s);
        let to_bar = band >= 0 && band % 2 == 0;
        let off = if to_bar { 0 } else { 2 };
        parts[off][k] = u0.components()[k];
        parts[off + 1][k] = u1.components()[k];
    }
    let [bu0, bu1, hu0, hu1] = parts;
    Ok(Decomposition {
        bar_u0: SpectralVector::new(spectrum.clone(), bu0)?,
        bar_u1: SpectralVector::new(spectrum.clone(), bu1)?,
        hat_u0: SpectralVector::new(spectrum.clone(), hu0)?,
        hat_u1: SpectralVector::new(spectrum, hu1)?,
        bands: s.chunks(2).filter(|c| c.len() == 2).map(|c| (c[0], c[1])).collect(),
        rho_bar: s.iter().skip(1).step_by(2).copied().collect(),
        rho_hat: s.iter().step_by(2).copied().collect(),
        breakpoints: s.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    /// radius at which both data must have a finite generalized Gevrey norm
    pub r_probe: f64,
    /// first breakpoint; the grid is `s_0 · 2^{j/2}`
    pub s0: f64,
    pub max_bands: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            r_probe: 1.0,
            s0: 1.0,
            max_bands: 256,
        }
    }
}

fn grid_point(s0: f64, j: usize) -> f64 {
    let base = s0 * 2f64.powi((j / 2) as i32);
    if j % 2 == 1 {
        base * SQRT_2
    } else {
        base
    }
}

/// Greedy splitting: `s_{n+1}` is the smallest grid value above `s_n` such
/// that the full tails `Σ_{λ ≥ s_{n+1}} λ^{4a} u² exp(s_n^β φ(λ))` stay
/// below `s_n` for `(u0, a = α+1/2)` and `(u1, a = α)`. The search ends once
/// the last two breakpoints lie above the support.
pub fn sum_decompose(
    u0: &SpectralVector,
    u1: &SpectralVector,
    phi: &FunctionSpec,
    alpha: f64,
    beta: f64,
    opts: &DecomposeOptions,
) -> Result<Decomposition> {
    u0.ensure_shared(u1)?;
    phi.validate()?;
    if !(opts.s0 > 0.0 && opts.s0.is_finite()) || !(opts.r_probe > 0.0) {
        return Err(Error::InvalidArgument("s0 and r_probe must be positive".into()));
    }
    if !(alpha >= 0.0 && beta >= 0.0) {
        return Err(Error::InvalidArgument("α and β must be nonnegative".into()));
    }
    let data = [(u0, alpha + 0.5), (u1, alpha)];
    for (u, a) in data {
        let p = GevreyParams::new(phi.clone(), opts.r_probe, a)?;
        if let Err(Error::NormOverflow { .. }) = gevrey_norm(u, &p) {
            return Err(Error::InsufficientDecay { exponent: a, band: 0 });
        }
    }

    let top = support_max(u0).max(support_max(u1));
    let mut idx = vec![0usize];
    let mut s = vec![opts.s0];
    while !(s.len() >= 2 && s[s.len() - 2] >= top) {
        if s.len() > opts.max_bands {
            return Err(Error::InsufficientDecay {
                exponent: alpha + 0.5,
                band: s.len() - 1,
            });
        }
        let rho = s[s.len() - 1];
        let rho_pow = rho.powf(beta);
        let mut j = idx[idx.len() - 1] + 1;
        loop {
            let cand = grid_point(opts.s0, j);
            let mut ok = true;
            for (u, a) in data {
                match tail(u, phi, a, rho_pow, cand, false)? {
                    Some(t) if t <= rho => {}
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok || cand > top {
                idx.push(j);
                s.push(cand);
                break;
            }
            j += 1;
        }
    }
    split_by_bands(u0, u1, &s)
}
