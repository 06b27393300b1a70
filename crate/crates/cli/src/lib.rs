//! Scenario runner for the Kirchhoff toolkit.
//!
//! A scenario is a TOML file naming one task, its inputs and parameters.
//! [`run_scenario`] resolves it, runs the task from a [`TaskRegistry`] and
//! writes the artifacts together with a `manifest.json`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod error;
pub mod registry;
pub mod scenario;
pub mod tasks;

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use artifacts::{ArtifactRecord, ArtifactSink};
pub use error::{CliError, CliResult};
pub use registry::{Check, Task, TaskRegistry};
pub use scenario::{Overrides, Resolved, Scenario};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub scenario: String,
    /// SHA-256 of the config bytes followed by the JSON-encoded overrides.
    pub scenario_hash: String,
    pub task: String,
    pub seed: u64,
    pub wall_time_seconds: f64,
    pub artifacts: Vec<ArtifactRecord>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn overrides_json(o: &Overrides) -> serde_json::Value {
    serde_json::json!({
        "out_dir": o.out_dir.as_ref().map(|p| p.display().to_string()),
        "tolerance_scale": o.tolerance_scale,
        "seed": o.seed,
    })
}

/// Parses and resolves a config, then checks the task's requirements.
pub fn validate_scenario(path: &Path, overrides: &Overrides, registry: &TaskRegistry) -> CliResult<Resolved> {
    let (sc, _) = scenario::load(path)?;
    let resolved = scenario::resolve(&sc, overrides)?;
    registry.get(&resolved.task)?.validate(&resolved)?;
    Ok(resolved)
}

pub fn run_scenario(path: &Path, overrides: &Overrides, registry: &TaskRegistry) -> CliResult<RunManifest> {
    let start = Instant::now();
    let (sc, bytes) = scenario::load(path)?;
    let resolved = scenario::resolve(&sc, overrides)?;
    let task = registry.get(&resolved.task)?;
    task.validate(&resolved)?;

    let mut sink = ArtifactSink::create(&resolved.output_dir)?;
    let checks = task.run(&resolved, &mut sink)?;

    let mut hashed = bytes;
    hashed.extend(serde_json::to_vec(&overrides_json(overrides))?);
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: resolved.name.clone(),
        scenario_hash: artifacts::sha256_hex(&hashed),
        task: resolved.task.clone(),
        seed: resolved.seed,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        artifacts: sink.records().to_vec(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    sink.write_json("manifest.json", &manifest)?;
    Ok(manifest)
}
