//! Spectral-Galerkin toolkit for the abstract Kirchhoff equation
//!
//! ```text
//! u''(t) + m(|A^{1/2} u(t)|²) A u(t) = 0
//! ```
//!
//! with `A` given by its eigenvalues `λ_k²`. Vectors are component sequences
//! over a finite [`Spectrum`]; for data supported on the retained modes the
//! truncated system is the exact dynamics, since modes couple only through
//! the scalar `|A^{1/2} u|²`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod conditions;
pub mod dynamics;
pub mod error;
pub mod function;
pub mod modulus;
pub mod norms;
pub mod ode;
pub mod presets;
pub mod quadrature;
pub mod spectral_gap;
pub mod spectrum;
pub mod summation;
pub mod trajectory;

pub use conditions::{check_phi_condition, ConditionReport, HyperbolicMode};
pub use error::{Error, Result};
pub use function::FunctionSpec;
pub use modulus::{estimate_continuity_constant, verify_modulus_axioms};
pub use norms::{gevrey_norm, sobolev_norm, GevreyParams};
pub use spectrum::{SpectralVector, Spectrum};
pub use dynamics::{
    evolve, hamiltonian, higher_order_energy, linear_evolve, pohozaev_invariant, IntegratorConfig,
    SpectralState, Trajectory,
};
