//! Batch front end: JSON experiment configs in, CSV artifacts and a
//! `manifest.json` out.

mod config;
mod run;

use std::path::PathBuf;

pub use config::{
    validate, Command, EstimateSettings, Expectations, ExperimentConfig, FourierSettings, Lattice,
    RieszInstance, Schedule, SeriesRef, DEFAULT_OUTPUT, MAX_JITTER,
};
pub use run::{run, CheckOutcome, RunError, RunManifest, RunStatus};

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
}

/// Applies the command and overrides; a command that disagrees with the
/// config's own is a diagnostic.
pub fn prepare(
    mut config: ExperimentConfig,
    command: Command,
    o: Overrides,
) -> Result<ExperimentConfig, Vec<String>> {
    if let Some(c) = config.command {
        if c != command {
            return Err(vec![format!(
                "config is for {} but {} was requested",
                c.name(),
                command.name()
            )]);
        }
    }
    config.command = Some(command);
    if o.out.is_some() {
        config.output = o.out;
    }
    if o.tolerance.is_some() {
        config.tolerance = o.tolerance;
    }
    if o.seed.is_some() {
        config.seed = o.seed;
    }
    Ok(config)
}
