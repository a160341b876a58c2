//! One error type for the whole binary, classified by exit code.
//!
//! The process exits 0 on success, 2 on configuration or input-validation
//! problems, 3 when training or inference produces non-finite numbers, 4
//! when artifacts do not belong together (wrong vocabulary, unreadable or
//! incompatible checkpoints), and 1 for ordinary I/O trouble. Clap's own
//! usage errors also exit 2, so every "the invocation was wrong" case lands
//! on the same code.

use std::fmt;

use privmob_core::error::{DataError, ModelError, PipelineError, SweepError, TrainError};

/// A command failure, classified by which documented exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration, flags, or input data (exit 2).
    Config(String),
    /// Training or inference produced non-finite numbers (exit 3).
    Numerical(String),
    /// Artifacts that do not fit together or cannot be read back (exit 4).
    Artifact(String),
    /// Ordinary I/O trouble, typically while writing results (exit 1).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Artifact(_) => 4,
        }
    }

    /// Classifies a failure raised while training a model.
    pub fn from_train(error: TrainError) -> CliError {
        match &error {
            TrainError::NonFiniteLoss { .. } => CliError::Numerical(error.to_string()),
            TrainError::Model(model_error) => classify_model(model_error, &error),
            TrainError::BadConfig { .. } | TrainError::EmptyTrainingSet => {
                CliError::Config(error.to_string())
            }
            _ => CliError::Artifact(error.to_string()),
        }
    }

    /// Classifies a failure raised while loading a checkpoint back. A missing
    /// file is a wrong path (exit 2); anything present but unreadable or
    /// mismatched is an artifact problem (exit 4).
    pub fn from_artifact_load(error: TrainError) -> CliError {
        match &error {
            TrainError::CheckpointIo { source, .. }
                if source.kind() == std::io::ErrorKind::NotFound =>
            {
                CliError::Config(error.to_string())
            }
            _ => CliError::Artifact(error.to_string()),
        }
    }

    /// Classifies a forward-pass or evaluation failure.
    pub fn from_model(error: ModelError) -> CliError {
        classify_model(&error, &error)
    }

    pub fn from_data(error: DataError) -> CliError {
        CliError::Config(error.to_string())
    }

    pub fn from_pipeline(error: PipelineError) -> CliError {
        CliError::Config(error.to_string())
    }

    pub fn from_sweep(error: SweepError) -> CliError {
        match &error {
            SweepError::BadConfig { .. } => CliError::Config(error.to_string()),
            SweepError::CacheIo { .. } => CliError::Io(error.to_string()),
        }
    }

    pub fn io(context: &str, error: std::io::Error) -> CliError {
        CliError::Io(format!("{context}: {error}"))
    }
}

fn classify_model(error: &ModelError, display: &dyn fmt::Display) -> CliError {
    match error {
        ModelError::NonFinite { .. } => CliError::Numerical(display.to_string()),
        _ => CliError::Config(display.to_string()),
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg)
            | CliError::Numerical(msg)
            | CliError::Artifact(msg)
            | CliError::Io(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}
