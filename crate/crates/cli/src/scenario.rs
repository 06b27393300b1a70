//! Scenario files: TOML with an explicit `version`, one task, a spectrum, the
//! initial data, the (m, ω, φ) functions (directly or through a preset) and a
//! free-form `[params]` table read by the selected task.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use kirchhoff_core::dynamics::IntegratorConfig;
use kirchhoff_core::presets::{self, PresetBundle};
use kirchhoff_core::{FunctionSpec, HyperbolicMode, SpectralVector, Spectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCENARIO_VERSION: u32 = 1;
pub const DEFAULT_MODES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub task: Option<String>,
    #[serde(default)]
    pub tasks: Option<Vec<String>>,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub spectrum: SpectrumSpec,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default)]
    pub m: Option<FunctionSpec>,
    #[serde(default)]
    pub omega: Option<FunctionSpec>,
    #[serde(default)]
    pub phi: Option<FunctionSpec>,
    #[serde(default)]
    pub mode: Option<HyperbolicMode>,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumSpec {
    Explicit {
        values: Vec<f64>,
    },
    /// `λ_k = k^p`, `k = 1..=n`
    Powers {
        #[serde(default = "one")]
        p: f64,
        #[serde(default = "default_modes")]
        n: usize,
    },
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        SpectrumSpec::Powers {
            p: 1.0,
            n: DEFAULT_MODES,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn default_modes() -> usize {
    DEFAULT_MODES
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    #[serde(default)]
    pub u0: VectorSpec,
    #[serde(default)]
    pub u1: VectorSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorSpec {
    #[default]
    Zero,
    Explicit {
        values: Vec<f64>,
    },
    /// the `k`-th mode (1-based) with unit amplitude
    Unit {
        k: usize,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `u_k = c · exp(−γ λ_k^q)`
    Decay {
        #[serde(default = "one")]
        c: f64,
        gamma: f64,
        #[serde(default = "one")]
        q: f64,
    },
    /// `u_k = amplitude · ξ_k / k^decay` with `ξ_k` uniform on `[−1, 1]`
    Random {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "two")]
        decay: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_tol")]
    pub abs_tol: f64,
    #[serde(default)]
    pub max_step: Option<f64>,
    #[serde(default)]
    pub dense_output_dt: Option<f64>,
}

fn default_tol() -> f64 {
    1e-10
}

impl Default for IntegratorSection {
    fn default() -> Self {
        IntegratorSection {
            rel_tol: default_tol(),
            abs_tol: default_tol(),
            max_step: None,
            dense_output_dt: None,
        }
    }
}

/// Command-line adjustments applied on top of a scenario file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub tolerance_scale: Option<f64>,
    pub seed: Option<u64>,
}

/// A scenario with every reference resolved and every vector built.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub name: String,
    pub task: String,
    pub spectrum: Arc<Spectrum>,
    pub u0: SpectralVector,
    pub u1: SpectralVector,
    pub m: Option<FunctionSpec>,
    pub omega: Option<FunctionSpec>,
    pub phi: Option<FunctionSpec>,
    pub mode: Option<HyperbolicMode>,
    pub preset: Option<PresetBundle>,
    pub integrator: IntegratorConfig,
    pub params: toml::Table,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Resolved {
    pub fn require_m(&self) -> CliResult<&FunctionSpec> {
        self.m.as_ref().ok_or_else(|| CliError::validation("m", "this task needs a nonlinearity m"))
    }

    pub fn require_omega(&self) -> CliResult<&FunctionSpec> {
        self.omega
            .as_ref()
            .ok_or_else(|| CliError::validation("omega", "this task needs a continuity modulus ω"))
    }

    pub fn require_phi(&self) -> CliResult<&FunctionSpec> {
        self.phi.as_ref().ok_or_else(|| CliError::validation("phi", "this task needs a weight φ"))
    }

    pub fn require_mode(&self) -> CliResult<HyperbolicMode> {
        self.mode.ok_or_else(|| CliError::validation("mode", "this task needs mode = \"strict\" or \"weak\""))
    }

    /// Task parameters deserialized into the task's own schema.
    pub fn params<T: serde::de::DeserializeOwned>(&self) -> CliResult<T> {
        toml::Value::Table(self.params.clone())
            .try_into()
            .map_err(|e: toml::de::Error| CliError::validation("params", e.message().to_string()))
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn parse(text: &str) -> CliResult<Scenario> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        CliError::Parse {
            message: e.message().to_string(),
            line,
            column,
        }
    })
}

pub fn load(path: &Path) -> CliResult<(Scenario, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Parse {
        message: format!("not valid UTF-8: {e}"),
        line: 0,
        column: 0,
    })?;
    Ok((parse(text)?, bytes))
}

fn check_function(field: &str, f: &Option<FunctionSpec>) -> CliResult<()> {
    if let Some(f) = f {
        f.validate().map_err(|e| CliError::validation(field, e.to_string()))?;
    }
    Ok(())
}

fn build_vector(
    field: &str,
    spec: &VectorSpec,
    spectrum: &Arc<Spectrum>,
    rng: &mut ChaCha8Rng,
) -> CliResult<SpectralVector> {
    let n = spectrum.len();
    let v = match spec {
        VectorSpec::Zero => SpectralVector::zeros(spectrum.clone()),
        VectorSpec::Explicit { values } => {
            if values.len() != n {
                return Err(CliError::validation(
                    format!("{field}.values"),
                    format!("expected {n} components, found {}", values.len()),
                ));
            }
            SpectralVector::new(spectrum.clone(), values.clone())
                .map_err(|e| CliError::validation(field, e.to_string()))?
        }
        VectorSpec::Unit { k, amplitude } => {
            if *k == 0 || *k > n {
                return Err(CliError::validation(format!("{field}.k"), format!("mode index must be in 1..={n}")));
            }
            SpectralVector::unit(spectrum.clone(), k - 1)
                .map_err(|e| CliError::validation(field, e.to_string()))?
                .scaled(*amplitude)
        }
        VectorSpec::Decay { c, gamma, q } => {
            SpectralVector::from_fn(spectrum.clone(), |_, l| c * (-gamma * l.powf(*q)).exp())
        }
        VectorSpec::Random { amplitude, decay } => {
            let xi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            SpectralVector::from_fn(spectrum.clone(), |k, _| amplitude * xi[k] / ((k + 1) as f64).powf(*decay))
        }
    };
    if v.components().iter().any(|x| !x.is_finite()) {
        return Err(CliError::validation(field, "components must be finite"));
    }
    Ok(v)
}

/// Random data streams are drawn from ChaCha8 seeded with the scenario seed,
/// `u0` first, then `u1`.
pub fn data_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn resolve(sc: &Scenario, overrides: &Overrides) -> CliResult<Resolved> {
    if sc.version != SCENARIO_VERSION {
        return Err(CliError::validation(
            "version",
            format!("unsupported version {} (expected {SCENARIO_VERSION})", sc.version),
        ));
    }
    if sc.name.trim().is_empty() {
        return Err(CliError::validation("name", "must be nonempty"));
    }
    let task = match (&sc.task, &sc.tasks) {
        (Some(t), None) => t.clone(),
        (None, Some(list)) if list.len() == 1 => list[0].clone(),
        (None, Some(list)) if list.is_empty() => return Err(CliError::validation("tasks", "task list is empty")),
        (None, Some(_)) => return Err(CliError::validation("tasks", "exactly one task per scenario")),
        (Some(_), Some(_)) => return Err(CliError::validation("task", "give either `task` or `tasks`, not both")),
        (None, None) => return Err(CliError::validation("task", "no task given")),
    };

    let spectrum = match &sc.spectrum {
        SpectrumSpec::Explicit { values } => Spectrum::new(values.clone()),
        SpectrumSpec::Powers { p, n } => Spectrum::powers(*n, *p),
    }
    .map_err(|e| CliError::validation("spectrum", e.to_string()))?
    .shared();

    let seed = overrides.seed.or(sc.seed).unwrap_or(0);
    let mut rng = data_rng(seed);
    let u0 = build_vector("data.u0", &sc.data.u0, &spectrum, &mut rng)?;
    let u1 = build_vector("data.u1", &sc.data.u1, &spectrum, &mut rng)?;

    let preset = match &sc.preset {
        Some(name) => Some(
            presets::find(name).ok_or_else(|| CliError::validation("preset", format!("unknown preset {name:?}")))?,
        ),
        None => None,
    };
    let m = sc.m.clone().or_else(|| preset.as_ref().map(|p| p.m.clone()));
    let omega = sc.omega.clone().or_else(|| preset.as_ref().map(|p| p.omega.clone()));
    let phi = sc.phi.clone().or_else(|| preset.as_ref().map(|p| p.phi.clone()));
    let mode = sc.mode.or_else(|| preset.as_ref().map(|p| p.mode));
    check_function("m", &m)?;
    check_function("omega", &omega)?;
    check_function("phi", &phi)?;

    let scale = overrides.tolerance_scale.unwrap_or(1.0);
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(CliError::validation("tolerance_scale", "must be positive"));
    }
    let integrator = IntegratorConfig {
        rel_tol: sc.integrator.rel_tol * scale,
        abs_tol: sc.integrator.abs_tol * scale,
        max_step: sc.integrator.max_step.unwrap_or(f64::INFINITY),
        dense_output_dt: sc.integrator.dense_output_dt,
    };
    integrator
        .validate()
        .map_err(|e| CliError::validation("integrator", e.to_string()))?;

    let output_dir = overrides
        .out_dir
        .clone()
        .or_else(|| sc.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&sc.name));

    Ok(Resolved {
        name: sc.name.clone(),
        task,
        spectrum,
        u0,
        u1,
        m,
        omega,
        phi,
        mode,
        preset,
        integrator,
        params: sc.params.clone(),
        seed,
        output_dir,
    })
}
