use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kirchhoff_cli::{run_scenario, validate_scenario, CliError, CliResult, Overrides, TaskRegistry};

#[derive(Parser)]
#[command(name = "kirchhoff", version, about = "Spectral experiments for Kirchhoff equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task described by a scenario file
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Parse and check a scenario file without running it
    Validate {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// List the preset bundles and the available tasks
    Presets,
}

#[derive(Args)]
struct RunOpts {
    /// Directory for artifacts (overrides `output_dir`)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Multiply both integrator tolerances by this factor
    #[arg(long)]
    tolerance_scale: Option<f64>,
    /// Seed for random initial data
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps
    #[arg(long)]
    jobs: Option<usize>,
}

impl RunOpts {
    fn apply(&self) -> CliResult<Overrides> {
        if let Some(j) = self.jobs {
            rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build_global()
                .map_err(|e| CliError::validation("jobs", e.to_string()))?;
        }
        Ok(Overrides {
            out_dir: self.out_dir.clone(),
            tolerance_scale: self.tolerance_scale,
            seed: self.seed,
        })
    }
}

fn execute(cli: Cli) -> CliResult<bool> {
    let registry = TaskRegistry::builtin();
    match cli.command {
        Command::Run { config, opts } => {
            let manifest = run_scenario(&config, &opts.apply()?, &registry)?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
            Ok(manifest.passed)
        }
        Command::Validate { config, opts } => {
            let r = validate_scenario(&config, &opts.apply()?, &registry)?;
            println!(
                "{}",
                serde_json::json!({ "valid": true, "scenario": r.name, "task": r.task, "modes": r.spectrum.len() })
            );
            Ok(true)
        }
        Command::Presets => {
            for b in kirchhoff_core::presets::catalog() {
                println!("{:<28} {:?} {:?}  {}", b.name, b.mode, b.regime, b.description);
            }
            println!();
            for t in registry.iter() {
                println!("{:<16} {}", t.name(), t.summary());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("{}", e.to_record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
