//! Training: the adversarial loop, its single-task degenerations, Adam
//! with gradient clipping, early stopping, and exact-resume checkpoints.

mod adam;
mod checkpoint;
mod convergence;
mod engine;

pub use adam::{AdamConfig, AdamState, Moments};
pub use checkpoint::{
    write_atomic, Checkpoint, CheckpointManifest, GroupOptimizerState, MomentTensors, Progress,
    TensorData, CHECKPOINT_FORMAT_VERSION,
};
pub use convergence::{check_convergence, ConvergenceConfig, ConvergenceTracker};
pub use engine::{
    train_frozen_encoder_probe, train_pae, train_standalone, write_history_csv, HeadUpdateFlags,
    HistoryRow, TrainConfig, TrainOutcome, Trainer,
};
