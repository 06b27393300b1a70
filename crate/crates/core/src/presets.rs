//! Built-in (ω, φ, m) bundles.
//!
//! Each bundle records the regularity class of the nonlinearity (through a
//! modulus ω and a representative `m`), the weight φ of the matching data
//! space, the hyperbolicity regime it belongs to, and whether the pair is an
//! existence pair or a derivative-loss pair. Hölder rows are instantiated at
//! β = 1/2.
//!
//! Guards: moduli are continued linearly past a knee (σ = 1 for powers,
//! earlier for the logarithmic ones, where the formula stops being increasing
//! and concave); weights involving `log σ` are evaluated at `max(σ, e)` and all
//! weights are clamped to `[1, +∞)`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::conditions::HyperbolicMode;
use crate::function::FunctionSpec;

pub const HOLDER_BETA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Existence,
    Loss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetBundle {
    pub name: String,
    pub source: String,
    pub description: String,
    pub mode: HyperbolicMode,
    pub regime: Regime,
    pub omega: FunctionSpec,
    pub phi: FunctionSpec,
    pub m: FunctionSpec,
}

fn power_modulus(beta: f64) -> FunctionSpec {
    FunctionSpec::power(beta).with_linear_tail(1.0)
}

fn weight(f: FunctionSpec) -> FunctionSpec {
    f.at_least(1.0)
}

fn log_weight(p: f64, q: f64) -> FunctionSpec {
    weight(FunctionSpec::log_power(p, q, E))
}

struct Row {
    name: &'static str,
    source: &'static str,
    description: &'static str,
    mode: HyperbolicMode,
    regime: Regime,
    omega: FunctionSpec,
    phi: FunctionSpec,
}

fn rows() -> Vec<Row> {
    use HyperbolicMode::{Strict, Weak};
    use Regime::{Existence, Loss};
    let b = HOLDER_BETA;
    let generic = power_modulus(0.5);
    vec![
        Row {
            name: "table1_analytic",
            source: "table 1",
            description: "any modulus, continuous m, φ(σ) = σ: analytic data",
            mode: Strict,
            regime: Existence,
            omega: generic.clone(),
            phi: weight(FunctionSpec::power(1.0)),
        },
        Row {
            name: "table1_dual",
            source: "table 1",
            description: "any modulus, continuous m, φ(σ) = σ ω(1/σ)",
            mode: Strict,
            regime: Existence,
            omega: generic.clone(),
            phi: weight(FunctionSpec::strict_dual(generic.clone())),
        },
        Row {
            name: "table1_holder_beta",
            source: "table 1",
            description: "β-Hölder m, φ(σ) = σ^(1−β): Gevrey data of order 1/(1−β)",
            mode: Strict,
            regime: Existence,
            omega: power_modulus(b),
            phi: weight(FunctionSpec::power(1.0 - b)),
        },
        Row {
            name: "table1_log_lipschitz",
            source: "table 1",
            description: "log-Lipschitz m, φ(σ) = log σ: Sobolev data above D(A^3/4) × D(A^1/4)",
            mode: Strict,
            regime: Existence,
            omega: FunctionSpec::LogLipschitz,
            phi: log_weight(0.0, 1.0),
        },
        Row {
            name: "table1_lipschitz",
            source: "table 1",
            description: "Lipschitz m, φ ≡ 1: data in D(A^3/4) × D(A^1/4)",
            mode: Strict,
            regime: Existence,
            omega: FunctionSpec::power(1.0),
            phi: FunctionSpec::constant(1.0),
        },
        Row {
            name: "table2_analytic",
            source: "table 2",
            description: "any modulus, continuous m, φ(σ) = σ: analytic data",
            mode: Weak,
            regime: Existence,
            omega: generic.clone(),
            phi: weight(FunctionSpec::power(1.0)),
        },
        Row {
            name: "table2_little_o",
            source: "table 2",
            description: "any modulus, continuous m, φ = inverse of σ/sqrt(ω(1/σ)) = o(σ)",
            mode: Weak,
            regime: Existence,
            omega: generic.clone(),
            phi: weight(FunctionSpec::weak_dual(generic)),
        },
        Row {
            name: "table2_holder_beta",
            source: "table 2",
            description: "β-Hölder m, φ(σ) = σ^(2/(β+2)): Gevrey data of order 1 + β/2",
            mode: Weak,
            regime: Existence,
            omega: power_modulus(b),
            phi: weight(FunctionSpec::power(2.0 / (b + 2.0))),
        },
        Row {
            name: "table2_lipschitz",
            source: "table 2",
            description: "Lipschitz m, φ(σ) = σ^(2/3): Gevrey data of order 3/2",
            mode: Weak,
            regime: Existence,
            omega: FunctionSpec::power(1.0),
            phi: weight(FunctionSpec::power(2.0 / 3.0)),
        },
        Row {
            name: "table3_loglog",
            source: "table 3",
            description: "just continuous m ~ 1/|log σ|^(1/2), φ(σ) = σ/log σ: quasi-analytic data",
            mode: Strict,
            regime: Loss,
            omega: FunctionSpec::log_power(0.0, -0.5, 0.0).with_linear_tail((-2.0f64).exp()),
            phi: log_weight(1.0, -1.0),
        },
        Row {
            name: "table3_holder_beta",
            source: "table 3",
            description: "β-Hölder m, φ(σ) = σ^(1−β)/log σ: Gevrey data of order > 1/(1−β)",
            mode: Strict,
            regime: Loss,
            omega: power_modulus(b),
            phi: log_weight(1.0 - b, -1.0),
        },
        Row {
            name: "table3_log_cubed",
            source: "table 3",
            description: "m ~ σ|log σ|^3 (Hölder for all β < 1), φ(σ) = log² σ: D(A^∞) data",
            mode: Strict,
            regime: Loss,
            omega: FunctionSpec::log_power(1.0, 3.0, 0.0).with_linear_tail((-4.0f64).exp()),
            phi: log_weight(0.0, 2.0),
        },
        Row {
            name: "table4_holder_beta",
            source: "table 4",
            description: "β-Hölder m, φ(σ) = σ^(2/(β+2))/log σ: Gevrey data of order > 1 + β/2",
            mode: Weak,
            regime: Loss,
            omega: power_modulus(b),
            phi: log_weight(2.0 / (b + 2.0), -1.0),
        },
        Row {
            name: "table4_lipschitz",
            source: "table 4",
            description: "Lipschitz m, φ(σ) = σ^(2/3)/log σ: Gevrey data of order > 3/2",
            mode: Weak,
            regime: Loss,
            omega: FunctionSpec::power(1.0),
            phi: log_weight(2.0 / 3.0, -1.0),
        },
    ]
}

/// The catalog, sorted by name.
pub fn catalog() -> Vec<PresetBundle> {
    let mut out: Vec<PresetBundle> = rows()
        .into_iter()
        .map(|r| {
            // strictly hyperbolic rows get m = 1 + ω, weakly hyperbolic rows m = ω
            let m = match r.mode {
                HyperbolicMode::Strict => r.omega.clone().shifted(1.0),
                HyperbolicMode::Weak => r.omega.clone(),
            };
            PresetBundle {
                name: r.name.to_string(),
                source: r.source.to_string(),
                description: r.description.to_string(),
                mode: r.mode,
                regime: r.regime,
                omega: r.omega,
                phi: r.phi,
                m,
            }
        })
        .collect();
    out.sort_by(|a, b| a.name.cmp(&b.name));
    out
}

pub fn find(name: &str) -> Option<PresetBundle> {
    catalog().into_iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_sorted_and_unique() {
        let c = catalog();
        assert!(!c.is_empty());
        assert!(c.windows(2).all(|w| w[0].name < w[1].name));
    }

    #[test]
    fn catalog_is_stable() {
        assert_eq!(catalog(), catalog());
    }

    #[test]
    fn table2_holder_weight() {
        let p = find("table2_holder_beta").unwrap();
        let expected = 2.0 / (HOLDER_BETA + 2.0);
        assert!((p.phi.eval(1.0e4) - 1.0e4f64.powf(expected)).abs() < 1e-9);
        assert_eq!(p.regime, Regime::Existence);
    }

    #[test]
    fn table3_loglog_is_a_loss_pair() {
        let p = find("table3_loglog").unwrap();
        assert_eq!(p.regime, Regime::Loss);
        let s = 1.0e-3f64;
        assert!((p.omega.eval(s) - 1.0 / s.ln().abs().sqrt()).abs() < 1e-15);
        let x = 1.0e4f64;
        assert!((p.phi.eval(x) - x / x.ln()).abs() < 1e-9);
    }

    #[test]
    fn weights_never_drop_below_one() {
        for p in catalog() {
            for s in [0.0, 1e-6, 0.5, 1.0, 2.0, 1e6] {
                assert!(p.phi.eval(s) >= 1.0, "{} at {s}", p.name);
            }
        }
    }
}
