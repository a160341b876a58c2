//! Loading a trained run back from disk.
//!
//! `privmob train` leaves three files in its output directory: the
//! checkpoint, the vocabulary it was trained against, and the run manifest.
//! Consumers point at the checkpoint; the two siblings are found next to
//! it. Every piece is cross-checked — the vocabulary must hash to the value
//! recorded in the checkpoint, and the manifest must agree with the
//! checkpoint on the sequence length — so mixed-up artifacts fail with exit
//! code 4 instead of producing quietly wrong numbers.

use std::fs;
use std::path::{Path, PathBuf};

use privmob_core::nnpae::{ModelKind, ModelParams};
use privmob_core::spatial::Vocab;
use privmob_core::training::{Checkpoint, Trainer};

use crate::errors::CliError;
use crate::manifest::{load_manifest, RunManifest};

/// A training run loaded back: checkpoint, vocabulary, and manifest.
pub struct TrainedArtifact {
    pub checkpoint: Checkpoint,
    pub vocab: Vocab,
    pub manifest: RunManifest,
}

/// The directory a checkpoint lives in (its siblings live there too).
fn artifact_dir(checkpoint_path: &Path) -> PathBuf {
    match checkpoint_path.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Loads and cross-checks the checkpoint plus its sibling `vocab.json` and
/// `manifest.json`.
pub fn load_trained(checkpoint_path: &Path) -> Result<TrainedArtifact, CliError> {
    let checkpoint = Checkpoint::load(checkpoint_path).map_err(CliError::from_artifact_load)?;
    let dir = artifact_dir(checkpoint_path);

    let vocab_path = dir.join("vocab.json");
    let vocab_text = fs::read_to_string(&vocab_path).map_err(|e| {
        CliError::Config(format!(
            "cannot read vocabulary `{}` (expected beside the checkpoint): {e}",
            vocab_path.display()
        ))
    })?;
    let vocab = Vocab::from_json(&vocab_text)
        .map_err(|e| CliError::Artifact(format!("vocabulary `{}`: {e}", vocab_path.display())))?;
    let found = vocab.sha256();
    if found != checkpoint.manifest.vocab_sha256 {
        return Err(CliError::Artifact(format!(
            "vocabulary `{}` hashes to {found} but checkpoint `{}` was trained against {}",
            vocab_path.display(),
            checkpoint_path.display(),
            checkpoint.manifest.vocab_sha256
        )));
    }

    let manifest = load_manifest(&dir.join("manifest.json"))?;
    let manifest_sl = manifest.config.preprocessing.sequence_length;
    let checkpoint_sl = checkpoint.manifest.dims.sequence_length;
    if manifest_sl != checkpoint_sl {
        return Err(CliError::Artifact(format!(
            "run manifest says sequence_length {manifest_sl} but the checkpoint was built for {checkpoint_sl}"
        )));
    }

    Ok(TrainedArtifact { checkpoint, vocab, manifest })
}

impl TrainedArtifact {
    /// Rebuilds the trained parameters (this also re-validates optimizer
    /// state and tensor shapes, so corruption surfaces here, not mid-batch).
    pub fn params(&self) -> Result<ModelParams, CliError> {
        let trainer = Trainer::from_checkpoint(&self.checkpoint, &self.vocab)
            .map_err(CliError::from_artifact_load)?;
        Ok(trainer.into_outcome().params)
    }
}

/// Loads a companion checkpoint (a standalone baseline) and checks it was
/// trained against the same vocabulary as the primary artifact.
pub fn load_companion(
    path: &Path,
    expected_kind: ModelKind,
    flag: &str,
    vocab: &Vocab,
) -> Result<ModelParams, CliError> {
    let checkpoint = Checkpoint::load(path).map_err(CliError::from_artifact_load)?;
    if checkpoint.manifest.model_kind != expected_kind {
        return Err(CliError::Artifact(format!(
            "{flag}: `{}` holds a `{}` model, not the expected `{}`",
            path.display(),
            crate::commands::kind_name(checkpoint.manifest.model_kind),
            crate::commands::kind_name(expected_kind)
        )));
    }
    let trainer =
        Trainer::from_checkpoint(&checkpoint, vocab).map_err(CliError::from_artifact_load)?;
    Ok(trainer.into_outcome().params)
}
