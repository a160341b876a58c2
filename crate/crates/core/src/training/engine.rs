//! The adversarial training loop and its single-task degenerations.
//!
//! One engine drives every model variant. Each epoch runs `inner_steps`
//! head iterations — sample a mini-batch, then step the decoder on the
//! reconstruction loss, the next-location head on its cross-entropy, and
//! the re-identification head on its cross-entropy, each against frozen
//! features — followed by one encoder step on the weighted combined
//! objective over a freshly sampled batch. A standalone baseline is the
//! same loop with the absent components simply skipped and the encoder
//! objective reduced to the single remaining loss, so a full model with
//! weights (0, 1, 0) and a standalone predictor perform bit-identical
//! arithmetic.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::SequenceExample;
use crate::error::TrainError;
use crate::nnpae::{
    build_model, build_standalone, decoder_gradient, encoder_objective_gradient, head_gradient,
    loss_privacy, loss_reconstruction, loss_sum, loss_utility, make_batch, Batch, ComponentLosses,
    LagrangeWeights, ModelDims, ModelKind, ModelParams, ObjectiveCoeffs, ParamGroup,
};
use crate::seeding::rng_for;
use crate::spatial::Vocab;
use crate::training::adam::{AdamConfig, AdamState};
use crate::training::convergence::{ConvergenceConfig, ConvergenceTracker};

/// Which classifier/decoder updates run during the head phase. All on by
/// default; individual flags exist for ablations and frozen-feature probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadUpdateFlags {
    pub reconstruction: bool,
    pub utility: bool,
    pub privacy: bool,
}

impl Default for HeadUpdateFlags {
    fn default() -> Self {
        HeadUpdateFlags { reconstruction: true, utility: true, privacy: true }
    }
}

/// Everything the training loop needs besides the data and the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Epoch budget (early stopping may end the run sooner).
    pub epochs: usize,
    /// Head iterations per epoch before the encoder step.
    pub inner_steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Per-group global-norm gradient clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Loss weights for the combined objective (full model only).
    pub weights: LagrangeWeights,
    /// Master seed: initialization and batch sampling both derive from it.
    pub seed: u64,
    /// Early stopping on the validation objective; `None` runs the full
    /// epoch budget.
    pub convergence: Option<ConvergenceConfig>,
    /// Run the encoder step after every head iteration (on the same batch)
    /// instead of once per epoch on a fresh batch.
    pub encoder_step_per_batch: bool,
    pub head_updates: HeadUpdateFlags,
    /// Disable to freeze the encoder, e.g. when probing fixed features
    /// with a fresh head.
    pub encoder_updates: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            inner_steps: 1,
            batch_size: 256,
            learning_rate: 0.001,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: Some(5.0),
            weights: LagrangeWeights { lambda1: 0.1, lambda2: 0.6, lambda3: 0.3 },
            seed: 0,
            convergence: None,
            encoder_step_per_batch: false,
            head_updates: HeadUpdateFlags::default(),
            encoder_updates: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let positive_counts = [
            ("epochs", self.epochs),
            ("inner_steps", self.inner_steps),
            ("batch_size", self.batch_size),
        ];
        for (field, value) in positive_counts {
            if value == 0 {
                return Err(TrainError::BadConfig { field, problem: "must be at least 1" });
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(TrainError::BadConfig {
                field: "learning_rate",
                problem: "must be positive and finite",
            });
        }
        for (field, value) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&value) {
                return Err(TrainError::BadConfig { field, problem: "must lie in [0, 1)" });
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(TrainError::BadConfig {
                field: "epsilon",
                problem: "must be positive and finite",
            });
        }
        if let Some(clip) = self.clip_norm {
            if !(clip.is_finite() && clip > 0.0) {
                return Err(TrainError::BadConfig {
                    field: "clip_norm",
                    problem: "must be positive and finite when set",
                });
            }
        }
        if let Some(convergence) = &self.convergence {
            if convergence.patience == 0 {
                return Err(TrainError::BadConfig {
                    field: "convergence.patience",
                    problem: "must be at least 1",
                });
            }
            if !(convergence.min_delta.is_finite() && convergence.min_delta >= 0.0) {
                return Err(TrainError::BadConfig {
                    field: "convergence.min_delta",
                    problem: "must be nonnegative and finite",
                });
            }
        }
        Ok(())
    }
}

/// One epoch's bookkeeping. The component columns are means over the head
/// iterations of that epoch (0.0 for components the model lacks or has
/// disabled), the combined column applies the objective formula to exactly
/// those logged values, and the validation column applies the same formula
/// to a full deterministic pass over the validation set (NaN when there is
/// no validation data).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub l_r: f64,
    pub l_u: f64,
    pub l_p: f64,
    pub l_sum: f64,
    /// NaN when the run has no validation data; stored as JSON null.
    #[serde(with = "float_or_null")]
    pub val_l_sum: f64,
}

/// JSON has no NaN literal, so the validation column round-trips NaN as
/// null. Finite values serialize as ordinary numbers, exactly.
mod float_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        if value.is_nan() {
            serializer.serialize_none()
        } else {
            serializer.serialize_some(value)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(deserializer)?.unwrap_or(f64::NAN))
    }
}

/// Writes history rows as CSV with the column header
/// `epoch,L_R,L_U,L_P,L_sum,val_L_sum`. Floats print in shortest
/// round-trip form, so parsing a column back recovers the exact values.
pub fn write_history_csv<W: std::io::Write>(
    history: &[HistoryRow],
    writer: &mut W,
) -> std::io::Result<()> {
    writeln!(writer, "epoch,L_R,L_U,L_P,L_sum,val_L_sum")?;
    for row in history {
        writeln!(
            writer,
            "{},{},{},{},{},{}",
            row.epoch, row.l_r, row.l_u, row.l_p, row.l_sum, row.val_l_sum
        )?;
    }
    Ok(())
}

/// A model mid-training: parameters, per-group optimizer state, the batch
/// sampler, and progress bookkeeping. Serializes to a checkpoint and back
/// without perturbing a run (resuming is bit-identical to not stopping).
pub struct Trainer {
    pub(crate) params: ModelParams,
    pub(crate) config: TrainConfig,
    pub(crate) coeffs: ObjectiveCoeffs,
    pub(crate) adam: BTreeMap<ParamGroup, AdamState>,
    pub(crate) batch_rng: ChaCha20Rng,
    pub(crate) history: Vec<HistoryRow>,
    pub(crate) best_validation: f64,
    pub(crate) stall_epochs: usize,
    pub(crate) epochs_completed: usize,
    pub(crate) converged: bool,
    pub(crate) vocab_sha256: String,
}

/// What a finished run hands back.
#[derive(Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<HistoryRow>,
    pub epochs_completed: usize,
    pub converged: bool,
}

impl Trainer {
    /// Wraps freshly built or resumed parameters for training. The combined
    /// objective uses the configured weights for the full model and a unit
    /// coefficient on the single trained loss for standalone baselines.
    pub fn new(params: ModelParams, config: TrainConfig, vocab: &Vocab) -> Result<Trainer, TrainError> {
        config.validate()?;
        params.dims.validate().map_err(TrainError::Model)?;
        if params.kind == ModelKind::Pae {
            config.weights.validate().map_err(TrainError::Model)?;
        }
        let coeffs = match params.kind {
            ModelKind::Pae => ObjectiveCoeffs::adversarial(&config.weights),
            kind => ObjectiveCoeffs::single(kind),
        };
        let adam = params
            .groups()
            .into_iter()
            .map(|group| {
                let tensors: Vec<&Array2<f64>> =
                    params.tensors(group).into_iter().map(|(_, t)| t).collect();
                (group, AdamState::new(&tensors))
            })
            .collect();
        let batch_rng = rng_for(config.seed, "batch");
        Ok(Trainer {
            params,
            coeffs,
            adam,
            batch_rng,
            history: Vec::new(),
            best_validation: f64::INFINITY,
            stall_epochs: 0,
            epochs_completed: 0,
            converged: false,
            vocab_sha256: vocab.sha256(),
            config,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn history(&self) -> &[HistoryRow] {
        &self.history
    }

    pub fn epochs_completed(&self) -> usize {
        self.epochs_completed
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn vocab_sha256(&self) -> &str {
        &self.vocab_sha256
    }

    pub fn into_outcome(self) -> TrainOutcome {
        TrainOutcome {
            params: self.params,
            history: self.history,
            epochs_completed: self.epochs_completed,
            converged: self.converged,
        }
    }

    /// Trains until the epoch budget is exhausted or early stopping fires.
    pub fn run(
        &mut self,
        train: &[SequenceExample],
        validation: &[SequenceExample],
        vocab: &Vocab,
    ) -> Result<(), TrainError> {
        self.run_epochs(train, validation, vocab, usize::MAX)
    }

    /// Trains at most `additional` further epochs (still respecting the
    /// budget and early stopping); lets callers checkpoint mid-run.
    pub fn run_epochs(
        &mut self,
        train: &[SequenceExample],
        validation: &[SequenceExample],
        vocab: &Vocab,
        additional: usize,
    ) -> Result<(), TrainError> {
        if train.is_empty() {
            return Err(TrainError::EmptyTrainingSet);
        }
        let mut remaining = additional;
        while self.epochs_completed < self.config.epochs && !self.converged && remaining > 0 {
            self.run_one_epoch(train, validation, vocab)?;
            remaining -= 1;
        }
        Ok(())
    }

    fn run_one_epoch(
        &mut self,
        train: &[SequenceExample],
        validation: &[SequenceExample],
        vocab: &Vocab,
    ) -> Result<(), TrainError> {
        let epoch = self.epochs_completed + 1;
        let mut sums = ComponentLosses::default();
        for _ in 0..self.config.inner_steps {
            let indices = self.sample_indices(train.len());
            let batch = make_batch(train, &indices, vocab)?;
            self.head_phase(&batch, epoch, &mut sums)?;
            if self.config.encoder_updates && self.config.encoder_step_per_batch {
                self.encoder_phase(&batch, epoch)?;
            }
        }
        if self.config.encoder_updates && !self.config.encoder_step_per_batch {
            let indices = self.sample_indices(train.len());
            let batch = make_batch(train, &indices, vocab)?;
            self.encoder_phase(&batch, epoch)?;
        }

        let denom = self.config.inner_steps as f64;
        let (l_r, l_u, l_p) = (sums.l_r / denom, sums.l_u / denom, sums.l_p / denom);
        let l_sum = self.combine(l_r, l_u, l_p);
        let val_l_sum = self.validation_objective(validation, vocab)?;
        self.history.push(HistoryRow { epoch, l_r, l_u, l_p, l_sum, val_l_sum });
        self.epochs_completed = epoch;

        if let Some(convergence) = self.config.convergence {
            if val_l_sum.is_finite() {
                let mut tracker =
                    ConvergenceTracker { best: self.best_validation, stall: self.stall_epochs };
                let done = tracker.observe(val_l_sum, &convergence);
                self.best_validation = tracker.best;
                self.stall_epochs = tracker.stall;
                if done {
                    self.converged = true;
                }
            }
        }
        Ok(())
    }

    /// One head iteration: every present, enabled component takes an Adam
    /// step on its own loss while the encoder stays frozen. Losses are
    /// accumulated for the epoch's history row.
    fn head_phase(
        &mut self,
        batch: &Batch,
        epoch: usize,
        sums: &mut ComponentLosses,
    ) -> Result<(), TrainError> {
        if self.params.kind.has_decoder() && self.config.head_updates.reconstruction {
            let (l_r, grads) = decoder_gradient(&self.params, batch)?;
            guard_finite(l_r, "reconstruction loss", epoch)?;
            self.apply(ParamGroup::Decoder, &grads)?;
            sums.l_r += l_r;
        }
        if self.params.kind.has_utility() && self.config.head_updates.utility {
            let (l_u, grads) = head_gradient(&self.params, batch, true)?;
            guard_finite(l_u, "next-location loss", epoch)?;
            self.apply(ParamGroup::Utility, &grads)?;
            sums.l_u += l_u;
        }
        if self.params.kind.has_privacy() && self.config.head_updates.privacy {
            let (l_p, grads) = head_gradient(&self.params, batch, false)?;
            guard_finite(l_p, "re-identification loss", epoch)?;
            self.apply(ParamGroup::Privacy, &grads)?;
            sums.l_p += l_p;
        }
        Ok(())
    }

    /// The encoder step on the combined objective. Loss terms with a zero
    /// coefficient are skipped entirely, so a degenerate weight vector
    /// reproduces a standalone baseline's arithmetic exactly.
    fn encoder_phase(&mut self, batch: &Batch, epoch: usize) -> Result<(), TrainError> {
        let (losses, grads) = encoder_objective_gradient(&self.params, batch, &self.coeffs)?;
        guard_finite(self.combine(losses.l_r, losses.l_u, losses.l_p), "combined loss", epoch)?;
        self.apply(ParamGroup::Encoder, &grads)
    }

    fn apply(&mut self, group: ParamGroup, grads: &[Array2<f64>]) -> Result<(), TrainError> {
        let adam_config = AdamConfig {
            learning_rate: self.config.learning_rate,
            beta1: self.config.beta1,
            beta2: self.config.beta2,
            epsilon: self.config.epsilon,
            clip_norm: self.config.clip_norm,
        };
        let state = self.adam.get_mut(&group).expect("optimizer state exists for every group");
        let mut tensors = self.params.tensors_mut(group);
        state.apply(&adam_config, &mut tensors, grads)?;
        Ok(())
    }

    /// Distinct example indices for one mini-batch (the whole set when it
    /// is smaller than the batch size).
    fn sample_indices(&mut self, n: usize) -> Vec<usize> {
        let take = self.config.batch_size.min(n);
        rand::seq::index::sample(&mut self.batch_rng, n, take).into_vec()
    }

    /// Mean losses over the validation set, evaluated in deterministic
    /// fixed-size chunks with no randomness, combined by the objective
    /// formula. Components with a zero coefficient are skipped (logged as
    /// zero); an empty validation set yields NaN.
    fn validation_objective(
        &self,
        validation: &[SequenceExample],
        vocab: &Vocab,
    ) -> Result<f64, TrainError> {
        if validation.is_empty() {
            return Ok(f64::NAN);
        }
        let mut recon_sum = 0.0;
        let mut recon_weight = 0.0;
        let mut utility_sum = 0.0;
        let mut privacy_sum = 0.0;
        let mut rows_total = 0.0;
        for start in (0..validation.len()).step_by(self.config.batch_size) {
            let end = (start + self.config.batch_size).min(validation.len());
            let indices: Vec<usize> = (start..end).collect();
            let batch = make_batch(validation, &indices, vocab)?;
            let features = self.params.encode(&batch)?;
            let rows = (end - start) as f64;
            if self.coeffs.reconstruction != 0.0 {
                let reconstruction = self.params.decode(&features)?;
                let weight = batch.mask.sum() * batch.inputs[0].ncols() as f64;
                recon_sum +=
                    loss_reconstruction(&batch.inputs, &reconstruction, &batch.mask)? * weight;
                recon_weight += weight;
            }
            if self.coeffs.utility != 0.0 {
                let probabilities = self.params.predict_next(&features)?;
                utility_sum += loss_utility(&batch.next_labels, &probabilities)? * rows;
            }
            if self.coeffs.privacy != 0.0 {
                let probabilities = self.params.reidentify(&features)?;
                privacy_sum += loss_privacy(&batch.user_labels, &probabilities)? * rows;
            }
            rows_total += rows;
        }
        let l_r = if self.coeffs.reconstruction != 0.0 { recon_sum / recon_weight } else { 0.0 };
        let l_u = if self.coeffs.utility != 0.0 { utility_sum / rows_total } else { 0.0 };
        let l_p = if self.coeffs.privacy != 0.0 { privacy_sum / rows_total } else { 0.0 };
        Ok(self.combine(l_r, l_u, l_p))
    }

    /// The scalar objective this trainer drives the encoder against, as a
    /// function of the three component losses.
    fn combine(&self, l_r: f64, l_u: f64, l_p: f64) -> f64 {
        match self.params.kind {
            ModelKind::Pae => loss_sum(&self.config.weights, l_r, l_u, l_p),
            _ => {
                self.coeffs.reconstruction * l_r
                    + self.coeffs.utility * l_u
                    + self.coeffs.privacy * l_p
            }
        }
    }
}

fn guard_finite(value: f64, component: &'static str, epoch: usize) -> Result<(), TrainError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(TrainError::NonFiniteLoss { component, epoch })
    }
}

/// Trains the full adversarial model from scratch.
pub fn train_pae(
    train: &[SequenceExample],
    validation: &[SequenceExample],
    dims: &ModelDims,
    config: &TrainConfig,
    vocab: &Vocab,
) -> Result<TrainOutcome, TrainError> {
    let params = build_model(ModelKind::Pae, dims, config.seed);
    let mut trainer = Trainer::new(params, config.clone(), vocab)?;
    trainer.run(train, validation, vocab)?;
    Ok(trainer.into_outcome())
}

/// Trains a single-task baseline (autoencoder, predictor, or
/// re-identifier) from scratch. The configured loss weights are ignored;
/// the baseline minimizes its one loss directly.
pub fn train_standalone(
    kind: ModelKind,
    train: &[SequenceExample],
    validation: &[SequenceExample],
    dims: &ModelDims,
    config: &TrainConfig,
    vocab: &Vocab,
) -> Result<TrainOutcome, TrainError> {
    if kind == ModelKind::Pae {
        return Err(TrainError::BadConfig {
            field: "kind",
            problem: "standalone training requires a single-task model kind",
        });
    }
    let params = build_standalone(kind, dims, config.seed);
    let mut trainer = Trainer::new(params, config.clone(), vocab)?;
    trainer.run(train, validation, vocab)?;
    Ok(trainer.into_outcome())
}

/// Trains a fresh re-identification head against a frozen copy of the
/// given model's encoder. This measures how much identity the shared
/// features still leak to an attacker who can train their own classifier:
/// the encoder never updates, only the new head does.
pub fn train_frozen_encoder_probe(
    source: &ModelParams,
    train: &[SequenceExample],
    validation: &[SequenceExample],
    config: &TrainConfig,
    vocab: &Vocab,
) -> Result<TrainOutcome, TrainError> {
    let mut probe_config = config.clone();
    probe_config.encoder_updates = false;
    let mut probe = build_standalone(ModelKind::StandaloneReidentifier, &source.dims, config.seed);
    probe.encoder = source.encoder.clone();
    let mut trainer = Trainer::new(probe, probe_config, vocab)?;
    trainer.run(train, validation, vocab)?;
    Ok(trainer.into_outcome())
}
