//! Experiment runner for the popcross models: config parsing, the `run` and
//! `compare` commands, and deterministic CSV/JSON output.

pub mod compare;
pub mod config;
pub mod error;
pub mod output;
pub mod run;

use std::path::{Path, PathBuf};

pub use compare::{compare, CompareOptions, Verdict};
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use run::{run, RunOutput};

/// Loads, validates and runs a config, then writes its outputs.
///
/// `out` overrides the config's output directory and `seed` its seed. Nothing
/// is written unless every report was computed.
pub fn run_config(path: &Path, out: Option<&Path>, seed: Option<u64>) -> CliResult<(String, PathBuf)> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = Some(s);
    }
    cfg.validate()?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let result = run(&cfg)?;
    result.artifacts.write(&dir)?;
    Ok((result.line, dir))
}
