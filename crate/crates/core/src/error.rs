use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid function: {0}")]
    InvalidFunction(String),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("dimension mismatch: expected {expected} components, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vectors do not share a spectrum")]
    SpectrumMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("norm overflow at mode k = {k} (exponent {exponent:.3e})")]
    NormOverflow { k: usize, exponent: f64 },

    #[error("invalid weight: φ({sigma:e}) = {value:e} < 1")]
    InvalidWeight { sigma: f64, value: f64 },

    #[error("not ω-continuous on grid: m({a:e}) ≠ m({b:e}) but ω(|a − b|) = 0")]
    NotOmegaContinuous { a: f64, b: f64 },

    #[error("nonlinearity is negative: m({sigma:e}) = {value:e} at t = {t}")]
    NegativeNonlinearity { sigma: f64, value: f64, t: f64 },

    #[error("coefficient is negative: c({t}) = {value:e}")]
    NegativeCoefficient { t: f64, value: f64 },

    #[error("quadrature failed for M({sigma:e})")]
    Quadrature { sigma: f64 },

    #[error("nondegeneracy violated: a + b|A^(1/2)u|² = {value:e} ≤ 0")]
    PohozaevDegenerate { value: f64 },

    #[error("scale radius r0 − R·t is nonpositive at t = {t}")]
    NonpositiveRadius { t: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("insufficient decay: exponent {exponent}, band {band}")]
    InsufficientDecay { exponent: f64, band: usize },

    #[error("both ψ'(0) and ψ''(0) vanish; the reparametrization is not available")]
    HpMainViolated,

    #[error("parametrization degenerates at s = {s:e}")]
    ParametrizationDegenerate { s: f64 },

    #[error("F changes sign at σ = {sigma:e}")]
    SignChange { sigma: f64 },

    #[error("ψ is not monotone on the compared window (at t = {t})")]
    NonMonotone { t: f64 },

    #[error("problem {index}: {source}")]
    Problem {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}
