//! Experiment driver for the `stable-brw` binary: configuration, commands
//! and result bundles.

pub mod bundle;
pub mod commands;
pub mod config;

use std::path::Path;

use stable_brw::{Error, Result};

use crate::bundle::ResultBundle;
use crate::commands::Command;
use crate::config::ExperimentConfig;

/// Runs `cmd` on a pool of `threads` workers (all cores when `None`) and
/// writes the bundle to `out` when given.
pub fn run_command(
    cmd: Command,
    config: ExperimentConfig,
    seed: u64,
    threads: Option<usize>,
    out: Option<&Path>,
) -> Result<ResultBundle> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {threads:?} worker threads: {e}")))?;
    let bundle = pool.install(|| commands::execute(cmd, config, seed))?;
    if let Some(dir) = out {
        bundle
            .write(dir)
            .map_err(|e| Error::InvalidParameter(format!("cannot write results to {}: {e}", dir.display())))?;
    }
    Ok(bundle)
}
