//! Checkpointing: a trainer serializes to a single JSON document and back
//! with nothing lost.
//!
//! The format stores every parameter tensor by its qualified name, the
//! per-group optimizer moments, the batch sampler's exact stream position,
//! and the progress counters, so a run resumed from a checkpoint is
//! bit-identical to one that never stopped. Floats ride through JSON in
//! shortest round-trip form, which decodes back to the same bits.
//!
//! A checkpoint refuses to load against the wrong world: the format
//! version must match, and the vocabulary in use must hash to the one the
//! model was trained against (a model's class indices are meaningless
//! under any other vocabulary).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::TrainError;
use crate::nnpae::{build_model, ModelDims, ModelKind, ModelParams};
use crate::seeding::RngState;
use crate::spatial::Vocab;
use crate::training::adam::Moments;
use crate::training::engine::{HistoryRow, TrainConfig, Trainer};

/// Bumped on any incompatible change to the checkpoint layout.
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// A dense matrix in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorData {
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

impl TensorData {
    fn from_array(array: &Array2<f64>) -> TensorData {
        TensorData {
            shape: [array.nrows(), array.ncols()],
            data: array.iter().copied().collect(),
        }
    }

    fn to_array(&self, name: &str) -> Result<Array2<f64>, TrainError> {
        Array2::from_shape_vec((self.shape[0], self.shape[1]), self.data.clone()).map_err(|_| {
            TrainError::CheckpointState(format!(
                "tensor `{name}` declares shape {:?} but carries {} values",
                self.shape,
                self.data.len()
            ))
        })
    }
}

/// What the checkpointed model is and how it was being trained.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub model_kind: ModelKind,
    pub dims: ModelDims,
    pub train_config: TrainConfig,
    /// Hash of the vocabulary the model's class indices refer to.
    pub vocab_sha256: String,
}

/// Optimizer state for one parameter group, moments aligned with the
/// group's tensor order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupOptimizerState {
    pub step: u64,
    pub moments: Vec<MomentTensors>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentTensors {
    pub m: TensorData,
    pub v: TensorData,
}

/// Where the run stopped.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Progress {
    pub epochs_completed: usize,
    /// Best validation objective so far, stored as raw IEEE-754 bits so
    /// the initial +infinity survives JSON.
    pub best_validation_bits: u64,
    pub stall_epochs: usize,
    pub converged: bool,
    /// Exact position of the batch sampler's random stream.
    pub batch_rng: RngState,
}

/// A complete training snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub manifest: CheckpointManifest,
    /// Every parameter tensor, keyed by qualified name
    /// (e.g. `encoder.lstm.w_input`).
    pub params: BTreeMap<String, TensorData>,
    /// Optimizer state keyed by group name.
    pub optimizer: BTreeMap<String, GroupOptimizerState>,
    pub progress: Progress,
    pub history: Vec<HistoryRow>,
}

pub use crate::fsutil::write_atomic;

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let json = serde_json::to_string(self).expect("checkpoint serializes to JSON");
        write_atomic(path, json.as_bytes()).map_err(|source| TrainError::CheckpointIo {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Checkpoint, TrainError> {
        let text = fs::read_to_string(path).map_err(|source| TrainError::CheckpointIo {
            path: path.display().to_string(),
            source,
        })?;
        let checkpoint: Checkpoint =
            serde_json::from_str(&text).map_err(|source| TrainError::CheckpointParse {
                path: path.display().to_string(),
                source,
            })?;
        checkpoint.check_version()?;
        Ok(checkpoint)
    }

    fn check_version(&self) -> Result<(), TrainError> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(TrainError::CheckpointVersion {
                found: self.format_version,
                expected: CHECKPOINT_FORMAT_VERSION,
            });
        }
        Ok(())
    }

    /// Rebuilds the model parameters alone, for inference flows that need
    /// no optimizer state. Every stored tensor must land in a model slot
    /// of the same shape, and every slot must be filled.
    pub fn model(&self) -> Result<ModelParams, TrainError> {
        self.check_version()?;
        self.manifest.dims.validate().map_err(TrainError::Model)?;
        let mut params = build_model(
            self.manifest.model_kind,
            &self.manifest.dims,
            self.manifest.train_config.seed,
        );
        let mut filled = 0usize;
        for group in params.groups() {
            let names: Vec<String> =
                params.tensors(group).into_iter().map(|(name, _)| name).collect();
            let mut slots = params.tensors_mut(group);
            for (name, slot) in names.iter().zip(slots.iter_mut()) {
                let stored =
                    self.params.get(name).ok_or_else(|| TrainError::MissingTensor(name.clone()))?;
                let array = stored.to_array(name)?;
                if array.raw_dim() != slot.raw_dim() {
                    return Err(TrainError::CheckpointState(format!(
                        "tensor `{name}` has shape {:?}, model expects {:?}",
                        array.shape(),
                        slot.shape()
                    )));
                }
                **slot = array;
                filled += 1;
            }
        }
        if filled != self.params.len() {
            return Err(TrainError::CheckpointState(format!(
                "{} stored tensors match no slot on a {} model",
                self.params.len() - filled,
                self.manifest.model_kind.name()
            )));
        }
        Ok(params)
    }
}

impl Trainer {
    /// Snapshots the complete training state.
    pub fn checkpoint(&self) -> Checkpoint {
        let mut params = BTreeMap::new();
        for group in self.params.groups() {
            for (name, tensor) in self.params.tensors(group) {
                params.insert(name, TensorData::from_array(tensor));
            }
        }
        let optimizer = self
            .adam
            .iter()
            .map(|(group, state)| {
                let moments = state
                    .moments
                    .iter()
                    .map(|pair| MomentTensors {
                        m: TensorData::from_array(&pair.m),
                        v: TensorData::from_array(&pair.v),
                    })
                    .collect();
                (group.name().to_string(), GroupOptimizerState { step: state.step, moments })
            })
            .collect();
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            manifest: CheckpointManifest {
                model_kind: self.params.kind,
                dims: self.params.dims.clone(),
                train_config: self.config.clone(),
                vocab_sha256: self.vocab_sha256.clone(),
            },
            params,
            optimizer,
            progress: Progress {
                epochs_completed: self.epochs_completed,
                best_validation_bits: self.best_validation.to_bits(),
                stall_epochs: self.stall_epochs,
                converged: self.converged,
                batch_rng: RngState::capture(&self.batch_rng),
            },
            history: self.history.clone(),
        }
    }

    /// Reconstructs a trainer mid-run. The provided vocabulary must hash
    /// to the one recorded at training time.
    pub fn from_checkpoint(checkpoint: &Checkpoint, vocab: &Vocab) -> Result<Trainer, TrainError> {
        checkpoint.check_version()?;
        let found = vocab.sha256();
        if found != checkpoint.manifest.vocab_sha256 {
            return Err(TrainError::VocabHashMismatch {
                expected: checkpoint.manifest.vocab_sha256.clone(),
                found,
            });
        }
        let params = checkpoint.model()?;
        let mut trainer =
            Trainer::new(params, checkpoint.manifest.train_config.clone(), vocab)?;
        for (group, state) in trainer.adam.iter_mut() {
            let stored = checkpoint.optimizer.get(group.name()).ok_or_else(|| {
                TrainError::CheckpointState(format!(
                    "missing optimizer state for group `{}`",
                    group.name()
                ))
            })?;
            if stored.moments.len() != state.moments.len() {
                return Err(TrainError::CheckpointState(format!(
                    "group `{}` stores {} moment pairs, model has {} tensors",
                    group.name(),
                    stored.moments.len(),
                    state.moments.len()
                )));
            }
            state.step = stored.step;
            state.moments = stored
                .moments
                .iter()
                .enumerate()
                .map(|(index, pair)| {
                    let label = format!("{} moment {index}", group.name());
                    Ok(Moments { m: pair.m.to_array(&label)?, v: pair.v.to_array(&label)? })
                })
                .collect::<Result<Vec<Moments>, TrainError>>()?;
        }
        trainer.batch_rng =
            checkpoint.progress.batch_rng.restore().map_err(TrainError::CheckpointState)?;
        trainer.history = checkpoint.history.clone();
        trainer.epochs_completed = checkpoint.progress.epochs_completed;
        trainer.best_validation = f64::from_bits(checkpoint.progress.best_validation_bits);
        trainer.stall_epochs = checkpoint.progress.stall_epochs;
        trainer.converged = checkpoint.progress.converged;
        Ok(trainer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnpae::testsupport::{tiny_dims, tiny_world};
    use crate::nnpae::{LagrangeWeights, ParamGroup};

    fn config(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 4,
            seed: 17,
            weights: LagrangeWeights { lambda1: 0.1, lambda2: 0.6, lambda3: 0.3 },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn resuming_from_a_serialized_checkpoint_matches_an_uninterrupted_run() {
        let (vocab, examples) = tiny_world();
        let dims = tiny_dims(&vocab);
        let build = |epochs| {
            Trainer::new(
                build_model(ModelKind::Pae, &dims, 17),
                config(epochs),
                &vocab,
            )
            .unwrap()
        };

        let mut straight = build(6);
        straight.run(&examples, &examples, &vocab).unwrap();

        let mut interrupted = build(6);
        interrupted.run_epochs(&examples, &examples, &vocab, 3).unwrap();
        // Round-trip the snapshot through actual JSON text.
        let json = serde_json::to_string(&interrupted.checkpoint()).unwrap();
        let reloaded: Checkpoint = serde_json::from_str(&json).unwrap();
        let mut resumed = Trainer::from_checkpoint(&reloaded, &vocab).unwrap();
        resumed.run(&examples, &examples, &vocab).unwrap();

        assert_eq!(resumed.epochs_completed(), straight.epochs_completed());
        for group in straight.params().groups() {
            assert_eq!(
                resumed.params().group_digest(group),
                straight.params().group_digest(group),
                "group {group:?} diverged after resume"
            );
        }
        let pairs = straight.history().iter().zip(resumed.history());
        for (a, b) in pairs {
            assert_eq!(a.l_sum.to_bits(), b.l_sum.to_bits());
            assert_eq!(a.val_l_sum.to_bits(), b.val_l_sum.to_bits());
        }
    }

    #[test]
    fn checkpoint_file_round_trips_through_disk() {
        let (vocab, examples) = tiny_world();
        let dims = tiny_dims(&vocab);
        let mut trainer =
            Trainer::new(build_model(ModelKind::Pae, &dims, 3), config(2), &vocab).unwrap();
        trainer.run(&examples, &[], &vocab).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.checkpoint.json");
        trainer.checkpoint().save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        let restored = Trainer::from_checkpoint(&loaded, &vocab).unwrap();
        assert_eq!(restored.epochs_completed(), 2);
        assert_eq!(
            restored.params().group_digest(ParamGroup::Encoder),
            trainer.params().group_digest(ParamGroup::Encoder)
        );
        // NaN validation entries survive the JSON round trip as null.
        assert!(restored.history().iter().all(|row| row.val_l_sum.is_nan()));
    }

    #[test]
    fn unsupported_format_versions_are_rejected() {
        let (vocab, examples) = tiny_world();
        let dims = tiny_dims(&vocab);
        let mut trainer =
            Trainer::new(build_model(ModelKind::Pae, &dims, 3), config(1), &vocab).unwrap();
        trainer.run(&examples, &[], &vocab).unwrap();
        let mut checkpoint = trainer.checkpoint();
        checkpoint.format_version = 999;
        assert!(matches!(
            Trainer::from_checkpoint(&checkpoint, &vocab),
            Err(TrainError::CheckpointVersion { found: 999, .. })
        ));
    }

    #[test]
    fn vocabulary_mismatch_is_rejected() {
        let (vocab, examples) = tiny_world();
        let dims = tiny_dims(&vocab);
        let mut trainer =
            Trainer::new(build_model(ModelKind::Pae, &dims, 3), config(1), &vocab).unwrap();
        trainer.run(&examples, &[], &vocab).unwrap();
        let mut checkpoint = trainer.checkpoint();
        checkpoint.manifest.vocab_sha256 = "0000".into();
        assert!(matches!(
            Trainer::from_checkpoint(&checkpoint, &vocab),
            Err(TrainError::VocabHashMismatch { .. })
        ));
    }

    #[test]
    fn missing_and_misshapen_tensors_are_rejected() {
        let (vocab, examples) = tiny_world();
        let dims = tiny_dims(&vocab);
        let mut trainer =
            Trainer::new(build_model(ModelKind::Pae, &dims, 3), config(1), &vocab).unwrap();
        trainer.run(&examples, &[], &vocab).unwrap();

        let mut missing = trainer.checkpoint();
        missing.params.remove("encoder.lstm.w_input").unwrap();
        assert!(matches!(missing.model(), Err(TrainError::MissingTensor(name)) if name == "encoder.lstm.w_input"));

        let mut misshapen = trainer.checkpoint();
        misshapen.params.get_mut("encoder.embed.bias").unwrap().data.push(1.0);
        assert!(matches!(misshapen.model(), Err(TrainError::CheckpointState(_))));
    }

    #[test]
    fn rebuilt_model_matches_the_source_tensor_for_tensor() {
        let (vocab, examples) = tiny_world();
        let dims = tiny_dims(&vocab);
        let mut trainer =
            Trainer::new(build_model(ModelKind::Pae, &dims, 3), config(2), &vocab).unwrap();
        trainer.run(&examples, &[], &vocab).unwrap();
        let checkpoint = trainer.checkpoint();
        let rebuilt = checkpoint.model().unwrap();
        for group in trainer.params().groups() {
            for ((name_a, a), (name_b, b)) in
                trainer.params().tensors(group).iter().zip(rebuilt.tensors(group).iter())
            {
                assert_eq!(name_a, name_b);
                if a != b {
                    let diff = a.iter().zip(b.iter()).filter(|(x, y)| x != y).count();
                    panic!("tensor {name_a}: {diff} of {} entries differ", a.len());
                }
            }
        }
    }

    #[test]
    fn atomic_write_replaces_existing_content_completely() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("out.txt");
        write_atomic(&path, b"first version, quite long").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second");
    }
}
