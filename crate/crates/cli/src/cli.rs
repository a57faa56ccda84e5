//! Command-line front end.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::ENV_PREFIX;
use crate::error::CliError;
use crate::run::{self, Overrides, Source};
use crate::{bundled, keys};

#[derive(Debug, Parser)]
#[command(name = "coldamp", version, about = "Noise budgets, cold-damping simulations and calibrations")]
pub struct Args {
    /// Base seed for every random stream (overrides `scenario.seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for trajectory parallelism (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario from a config file or a bundled scenario name.
    Run { config: String },
    /// Check a scenario without running it.
    Validate { config: String },
    /// List the bundled scenarios.
    ListScenarios,
    /// Print the configuration key reference as Markdown.
    ConfigReference,
}

fn env_overrides() -> Vec<(String, String)> {
    std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect()
}

/// Runs the parsed command and returns the process exit code.
pub fn dispatch(args: Args) -> i32 {
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return 3;
        }
    }
    let ov = Overrides {
        seed: args.seed,
        out: args.out,
        env: env_overrides(),
    };
    let result = match args.command {
        Command::Run { config } => cmd_run(&config, &ov),
        Command::Validate { config } => cmd_validate(&config, &ov),
        Command::ListScenarios => {
            for (name, mode, desc) in bundled::list() {
                println!("{name:<10} {mode:<16} {desc}");
            }
            Ok(0)
        }
        Command::ConfigReference => {
            print!("{}", keys::reference_markdown());
            Ok(0)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn cmd_run(config: &str, ov: &Overrides) -> Result<i32, CliError> {
    let src = Source::load(config)?;
    let out = run::run(&src, ov)?;
    for w in &out.manifest.warnings {
        eprintln!("warning: {w}");
    }
    for line in &out.summary {
        println!("{line}");
    }
    println!(
        "wrote {} file(s) to {} (see {})",
        out.manifest.outputs.len(),
        out.output_dir.display(),
        run::MANIFEST
    );
    Ok(0)
}

fn cmd_validate(config: &str, ov: &Overrides) -> Result<i32, CliError> {
    let src = Source::load(config)?;
    let v = run::validate(&src, ov)?;
    for e in &v.errors {
        eprintln!("error: {e}");
    }
    for w in &v.warnings {
        eprintln!("warning: {w}");
    }
    match &v.scenario {
        Some(sc) => {
            println!("valid: scenario `{}` ({})", sc.name, sc.mode.name());
            Ok(0)
        }
        None => {
            println!("invalid: {} error(s)", v.errors.len());
            Ok(2)
        }
    }
}

pub fn main() -> i32 {
    dispatch(Args::parse())
}
