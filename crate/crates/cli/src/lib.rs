//! Configuration-driven experiment runner for the `ergolab` library.
//!
//! `ergolab <analyze-map|induce|spectrum|limits> --config <path>` runs one
//! stage and writes CSV tables, SVG plots and `manifest-<command>.txt` into the
//! output directory. Exit codes are listed in [`ExitStatus`].

pub mod cache;
pub mod commands;
pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub use commands::Command;
pub use config::{ConfigError, ExperimentConfig, Loaded};
pub use manifest::{ExitStatus, RunManifest};

/// Lowercase hex SHA-256.
pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Library(#[from] ergolab::Error),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

/// Command-line overrides on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

pub fn load(config: &Path, overrides: &Overrides) -> Result<Loaded, ConfigError> {
    let mut loaded = config::load(config)?;
    if let Some(out) = &overrides.out {
        loaded.config.output.dir = out.clone();
    }
    if let Some(seed) = overrides.seed {
        loaded.config.stats.seed = seed;
    }
    Ok(loaded)
}

/// Run `command` in the current rayon pool.
pub fn execute(command: Command, loaded: &Loaded) -> Result<RunManifest, RunError> {
    let threads = rayon::current_num_threads();
    commands::run(command, loaded, threads)
}

/// Run `command` on a dedicated pool of `threads` workers.
pub fn execute_with_threads(command: Command, loaded: &Loaded, threads: usize) -> Result<RunManifest, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    pool.install(|| execute(command, loaded))
}
