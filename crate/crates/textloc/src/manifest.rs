//! Reproducibility records written into every output directory.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::AppResult;
use crate::io;

pub const RUN_MANIFEST: &str = "run_manifest.json";
pub const CONFIG_ECHO: &str = "config.json";

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub command: &'a str,
    pub seed: u64,
    /// SHA-256 of the resolved configuration's canonical JSON.
    pub config_sha256: String,
    pub textloc_version: &'static str,
    pub core_version: &'static str,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    format!("{:x}", Sha256::digest(cfg.to_json().as_bytes()))
}

/// Writes `run_manifest.json` and the resolved `config.json` into `out`.
/// Neither contains timestamps, paths or host details, so identical runs
/// write identical records.
pub fn write_run_records(out: &Path, command: &str, cfg: &RunConfig) -> AppResult<()> {
    let m = RunManifest {
        command,
        seed: cfg.seed,
        config_sha256: config_hash(cfg),
        textloc_version: env!("CARGO_PKG_VERSION"),
        core_version: textloc_core::VERSION,
    };
    io::write_json(&out.join(RUN_MANIFEST), &m)?;
    let mut text = cfg.to_json();
    text.push('\n');
    io::write_atomic(&out.join(CONFIG_ECHO), text.as_bytes())
}
