//! Error types shared across the library.
//!
//! Errors are grouped by the layer that raises them so a caller can map them
//! onto coarse failure classes (bad input vs. numerical blow-up vs. artifact
//! incompatibility) without string matching.

use thiserror::Error;

/// Failures while reading, transforming, or generating record-level data.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: String, column: String },

    #[error("{path}: {skipped} of {total} rows unparseable (more than half); refusing to continue")]
    MostlyUnparseable {
        path: String,
        skipped: usize,
        total: usize,
    },

    #[error("resolution must be at least 1 minute, got {0}")]
    BadResolution(u32),

    #[error(
        "no trajectories survived filtering: {groups} user-weeks seen, \
         {dropped_short} dropped for fewer than {min_points} points, \
         {users_dropped} of {users} users dropped for fewer than {min_trajectories} trajectories"
    )]
    AllFiltered {
        groups: usize,
        dropped_short: usize,
        min_points: usize,
        users: usize,
        users_dropped: usize,
        min_trajectories: usize,
    },

    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),

    #[error("user `{user}` has {count} trajectory(ies); need at least 2 to split")]
    UnsplittableUser { user: String, count: usize },

    #[error("cannot split an empty dataset")]
    EmptyDataset,

    #[error("no sequence examples produced: {reason}")]
    NoSequences { reason: String },

    #[error("sequence length must be at least 1")]
    BadSequenceLength,

    #[error("synthetic config invalid: {0}")]
    BadSyntheticConfig(String),
}

/// Failures in coordinate handling, discretization, or vocabulary fitting.
#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("invalid bounding box: {0}")]
    InvalidBounds(String),

    #[error("cannot fit scaler: axis `{axis}` is degenerate (all values equal {value})")]
    DegenerateAxis { axis: &'static str, value: f64 },

    #[error("{axis} {value} outside grid bounds [{lo}, {hi}]")]
    OutOfBounds {
        axis: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("geohash precision must be between 1 and 12, got {0}")]
    BadPrecision(usize),

    #[error("invalid geohash character `{0}`")]
    BadGeohashChar(char),

    #[error("empty geohash string")]
    EmptyGeohash,

    #[error("latitude {0} outside [-90, 90]")]
    BadLatitude(f64),

    #[error("longitude {0} outside [-180, 180]")]
    BadLongitude(f64),

    #[error("cannot build a vocabulary from an empty dataset")]
    EmptyVocab,

    #[error("grid must have at least one cell per axis")]
    EmptyGrid,

    #[error("location index {index} out of range: vocabulary has {classes} location classes plus pad")]
    BadLocationIndex { index: usize, classes: usize },

    #[error("time fields out of range: day_of_week={day}, hour_of_day={hour}")]
    BadTimeField { day: u8, hour: u8 },
}

/// Failures inside the model: bad shapes, bad labels, non-finite numbers.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{what} contains a non-finite value at {location}")]
    NonFinite { what: &'static str, location: String },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("reconstruction mask selects no timesteps")]
    EmptyMask,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("loss weights must be nonnegative, got ({0}, {1}, {2})")]
    NegativeWeight(f64, f64, f64),

    #[error("loss weights must not all be zero")]
    AllZeroWeights,

    #[error("model dimension `{field}` must be at least 1")]
    BadDims { field: &'static str },

    #[error("model has no {component} component")]
    MissingComponent { component: &'static str },

    #[error("cannot evaluate an empty example set")]
    EmptyEvaluationSet,

    #[error(transparent)]
    Encoding(#[from] SpatialError),
}

/// Failures while composing the full record-to-example preparation pass.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("preparation config: `{field}` {problem}")]
    BadConfig {
        field: &'static str,
        problem: &'static str,
    },

    #[error(transparent)]
    Data(#[from] DataError),

    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

/// Failures orchestrating a parameter sweep. Individual cells that fail are
/// data, not errors — they ride along in the sweep outcome — so this only
/// covers problems that stop the whole sweep.
#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep config: `{field}` {problem}")]
    BadConfig {
        field: &'static str,
        problem: &'static str,
    },

    #[error("sweep cache at {path}: {source}")]
    CacheIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Failures in the training loop and checkpoint handling.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("training config: `{field}` {problem}")]
    BadConfig {
        field: &'static str,
        problem: &'static str,
    },

    #[error("{component} became non-finite at epoch {epoch}; aborting")]
    NonFiniteLoss { component: &'static str, epoch: usize },

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("checkpoint io at {path}: {source}")]
    CheckpointIo {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("checkpoint at {path} is not valid JSON: {source}")]
    CheckpointParse {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("checkpoint format version {found} unsupported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("checkpoint state invalid: {0}")]
    CheckpointState(String),

    #[error("checkpoint was trained against vocabulary {expected} but the provided vocabulary hashes to {found}")]
    VocabHashMismatch { expected: String, found: String },

    #[error("checkpoint is missing parameter tensor `{0}`")]
    MissingTensor(String),
}
