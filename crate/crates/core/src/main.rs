use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nqlab::cli::{prepare, run, Command, ExperimentConfig, Overrides, RunStatus};

const THREADS_VAR: &str = "NQLAB_THREADS";

/// Numerical experiments on kernel summation methods.
#[derive(Parser)]
#[command(name = "nqlab", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tolerance override.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Seed for grid jitter.
    #[arg(long)]
    seed: Option<u64>,
}

fn config_invalid(diagnostics: &[String]) -> ExitCode {
    for d in diagnostics {
        eprintln!("config: {d}");
    }
    ExitCode::from(RunStatus::ConfigInvalid.code() as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                {
                    eprintln!("warning: {THREADS_VAR} ignored: {e}");
                }
            }
            _ => {
                return config_invalid(&[format!(
                    "{THREADS_VAR} must be a positive integer (got {v:?})"
                )])
            }
        }
    }
    let overrides = Overrides {
        out: args.out,
        tolerance: args.tolerance,
        seed: args.seed,
    };
    let config = match ExperimentConfig::from_path(&args.config)
        .and_then(|c| prepare(c, args.command, overrides))
    {
        Ok(c) => c,
        Err(d) => return config_invalid(&d),
    };
    let manifest = run(&config);
    for d in &manifest.diagnostics {
        eprintln!("config: {d}");
    }
    for c in &manifest.checks {
        println!(
            "{} {}: {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    if let Some(e) = &manifest.error {
        eprintln!("error: {e}");
    }
    println!(
        "{}: {:?} in {:.2} s, output in {}",
        args.command.name(),
        manifest.status,
        manifest.wall_time_seconds,
        config.output_dir().display()
    );
    ExitCode::from(manifest.exit_code as u8)
}
