//! The run manifest written next to training artifacts.
//!
//! Everything in it is a deterministic function of the inputs except
//! `timestamp`, which is deliberately a single separate field: comparing two
//! runs for reproducibility means comparing all files byte-for-byte and this
//! one JSON key. Downstream commands (`predict`, `evaluate`) read the
//! manifest to recover the preprocessing settings the model was trained
//! with, since the checkpoint itself only knows about model and optimizer
//! state.

use std::fs;
use std::path::Path;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use privmob_core::pipeline::PrepStats;

use crate::config::ExperimentConfig;
use crate::errors::CliError;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// What a run wrote, with which settings, from which seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub package_version: String,
    pub seed: u64,
    pub model_kind: Option<String>,
    pub vocab_sha256: Option<String>,
    pub prep_stats: Option<PrepStats>,
    pub epochs_completed: Option<usize>,
    pub converged: Option<bool>,
    /// The fully resolved configuration (flag overrides already applied).
    pub config: ExperimentConfig,
    /// Wall-clock completion time, RFC 3339 UTC. The only field that may
    /// differ between two otherwise identical runs.
    pub timestamp: String,
}

impl RunManifest {
    pub fn now_timestamp() -> String {
        Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
    }
}

pub fn load_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!(
            "cannot read run manifest `{}` (expected beside the checkpoint): {e}",
            path.display()
        ))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Artifact(format!("run manifest `{}`: {e}", path.display())))
}
