//! Record-level data handling: CSV input/output, temporal resampling,
//! user-week trajectory assembly, train/test splitting, sliding-window
//! sequence extraction, and a synthetic trajectory generator.
//!
//! The canonical flow is
//!
//! ```text
//! load_records -> filter_bbox -> resample_to_resolution -> build_trajectories
//!              -> train_test_split -> make_sequences
//! ```
//!
//! with [`generate_synthetic`] standing in for `load_records` when no real
//! dataset is available.

mod csvio;
mod resample;
mod sequences;
mod split;
mod synthetic;
mod trajectories;

pub use csvio::{load_records, load_trajectory_store, write_records, write_trajectories, LoadOutcome};
pub use resample::resample_to_resolution;
pub use sequences::{make_sequences, SequenceOutcome};
pub use split::{split_validation, train_test_split};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticWorld};
pub use trajectories::build_trajectories;

use std::collections::BTreeMap;

use chrono::{NaiveDateTime, Timelike};

use crate::spatial::BoundingBox;

/// One raw observation: a user at a place at a time.
///
/// Timestamps are naive (no timezone) with minute precision; extra CSV
/// columns survive as categorical string attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationRecord {
    pub user_id: String,
    pub timestamp: NaiveDateTime,
    pub latitude: f64,
    pub longitude: f64,
    pub extras: BTreeMap<String, String>,
}

/// A point inside a trajectory, with the derived time-of-week fields the
/// encoder consumes. `day_of_week` is Sunday-based: 0 = Sunday .. 6 = Saturday.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub timestamp: NaiveDateTime,
    pub latitude: f64,
    pub longitude: f64,
    pub day_of_week: u8,
    pub hour_of_day: u8,
}

impl TrajectoryPoint {
    pub fn from_record(record: &LocationRecord) -> Self {
        TrajectoryPoint {
            timestamp: record.timestamp,
            latitude: record.latitude,
            longitude: record.longitude,
            day_of_week: day_of_week(record.timestamp),
            hour_of_day: record.timestamp.hour() as u8,
        }
    }
}

/// Sunday-based weekday index (0 = Sunday .. 6 = Saturday).
pub fn day_of_week(ts: NaiveDateTime) -> u8 {
    use chrono::Datelike;
    ts.weekday().num_days_from_sunday() as u8
}

/// All points one user produced within one ISO calendar week.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `{user}-{iso_year}-W{iso_week:02}`; unique within a dataset.
    pub trajectory_id: String,
    pub user_id: String,
    pub points: Vec<TrajectoryPoint>,
}

/// Provenance a dataset carries along so downstream stages can check
/// compatibility without re-deriving it.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatasetMeta {
    pub resolution_minutes: u32,
    pub bbox: Option<BoundingBox>,
}

/// A set of user-week trajectories plus a user -> trajectory index.
#[derive(Debug, Clone)]
pub struct TrajectoryDataset {
    pub trajectories: Vec<Trajectory>,
    /// Maps each user id to the indices of their trajectories, in dataset order.
    pub user_index: BTreeMap<String, Vec<usize>>,
    pub meta: DatasetMeta,
}

impl TrajectoryDataset {
    /// Rebuilds the user index from `trajectories`; call after any reorder.
    pub fn from_trajectories(trajectories: Vec<Trajectory>, meta: DatasetMeta) -> Self {
        let mut user_index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, t) in trajectories.iter().enumerate() {
            user_index.entry(t.user_id.clone()).or_default().push(i);
        }
        TrajectoryDataset { trajectories, user_index, meta }
    }

    pub fn num_points(&self) -> usize {
        self.trajectories.iter().map(|t| t.points.len()).sum()
    }
}

/// One timestep of model input after discretization: a vocabulary location
/// index plus the time-of-week fields. A `location` equal to the vocabulary's
/// pad index marks a padded step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodedPoint {
    pub location: usize,
    pub day_of_week: u8,
    pub hour_of_day: u8,
}

/// One supervised example: `sequence_length` consecutive encoded points, the
/// location class that followed them, and the user who produced them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceExample {
    pub context: Vec<EncodedPoint>,
    pub next_location: usize,
    pub user_label: usize,
    pub sequence_length: usize,
}
