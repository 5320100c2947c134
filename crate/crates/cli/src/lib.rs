//! Experiment runner for the `vbam` sampler: configuration presets, run
//! directories with chain, diagnostics and density tables, a JSON manifest,
//! model checks and run comparison.

pub mod compare;
pub mod config;
pub mod run;

use std::path::PathBuf;

pub use config::{Experiment, ExperimentConfig};
pub use run::{run_experiment, ChainReport, RunManifest, RunReport};

/// Environment variable naming the directory that holds run outputs.
pub const OUTPUT_ROOT_ENV: &str = "VBAM_OUTPUT_ROOT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(vbam::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub(crate) fn io(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<vbam::Error> for CliError {
    fn from(e: vbam::Error) -> Self {
        match e {
            vbam::Error::Io(msg) => CliError::Io(msg),
            vbam::Error::InvalidParameter { .. } | vbam::Error::DimensionMismatch { .. } | vbam::Error::Empty(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numerical(other),
        }
    }
}

/// Output root from the environment, defaulting to `./runs`.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Default run directory `<root>/<experiment>-<scheme>-seed<seed>`.
pub fn default_run_dir(cfg: &ExperimentConfig) -> PathBuf {
    output_root().join(format!("{}-{}-seed{}", cfg.experiment, cfg.scheme, cfg.seed))
}
