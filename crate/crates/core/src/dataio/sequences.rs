//! Sliding-window extraction of supervised sequence examples.

use super::{EncodedPoint, SequenceExample, TrajectoryDataset};
use crate::error::DataError;
use crate::spatial::{Discretizer, Vocab};

/// What came out of windowing, including why windows were dropped.
#[derive(Debug, Default)]
pub struct SequenceOutcome {
    pub examples: Vec<SequenceExample>,
    pub windows_total: usize,
    /// Windows touching a cell the vocabulary has never seen.
    pub dropped_unseen_cell: usize,
    /// Windows touching a point the discretizer refuses (outside its bounds).
    pub dropped_out_of_bounds: usize,
    /// Windows from users absent from the vocabulary.
    pub dropped_unknown_user: usize,
}

/// Slides a stride-1 window of length `sequence_length` over every
/// trajectory; the record after the window becomes the prediction target, so
/// a trajectory of `m` points yields `max(0, m - sequence_length)` examples
/// and windows never cross trajectory boundaries.
///
/// The vocabulary is closed: a window whose target or context touches an
/// unseen cell (or an unknown user) is dropped and counted rather than
/// remapped.
pub fn make_sequences(
    dataset: &TrajectoryDataset,
    sequence_length: usize,
    vocab: &Vocab,
    discretizer: &Discretizer,
) -> Result<SequenceOutcome, DataError> {
    if sequence_length == 0 {
        return Err(DataError::BadSequenceLength);
    }

    let mut outcome = SequenceOutcome::default();
    for trajectory in &dataset.trajectories {
        let m = trajectory.points.len();
        if m < sequence_length + 1 {
            continue;
        }
        let user_label = vocab.user_label(&trajectory.user_id);

        // Discretize each point once per trajectory. `Ok(None)` marks a cell
        // outside the vocabulary; `Err` marks a point the discretizer cannot
        // place at all.
        let encoded: Vec<Result<Option<usize>, ()>> = trajectory
            .points
            .iter()
            .map(|p| match discretizer.cell_id(p.latitude, p.longitude) {
                Ok(cell) => Ok(vocab.location_index(&cell)),
                Err(_) => Err(()),
            })
            .collect();

        for start in 0..(m - sequence_length) {
            outcome.windows_total += 1;
            let window = &encoded[start..=start + sequence_length];
            if window.iter().any(|e| e.is_err()) {
                outcome.dropped_out_of_bounds += 1;
                continue;
            }
            if window.iter().any(|e| matches!(e, Ok(None))) {
                outcome.dropped_unseen_cell += 1;
                continue;
            }
            let Some(user_label) = user_label else {
                outcome.dropped_unknown_user += 1;
                continue;
            };
            let context: Vec<EncodedPoint> = (start..start + sequence_length)
                .map(|i| EncodedPoint {
                    location: encoded[i].as_ref().unwrap().unwrap(),
                    day_of_week: trajectory.points[i].day_of_week,
                    hour_of_day: trajectory.points[i].hour_of_day,
                })
                .collect();
            let next_location = encoded[start + sequence_length].as_ref().unwrap().unwrap();
            outcome.examples.push(SequenceExample {
                context,
                next_location,
                user_label,
                sequence_length,
            });
        }
    }

    if outcome.examples.is_empty() {
        return Err(DataError::NoSequences {
            reason: format!(
                "{} windows seen, {} dropped for unseen cells, {} out of bounds, {} for unknown users, \
                 rest of trajectories shorter than {} points",
                outcome.windows_total,
                outcome.dropped_unseen_cell,
                outcome.dropped_out_of_bounds,
                outcome.dropped_unknown_user,
                sequence_length + 1,
            ),
        });
    }
    Ok(outcome)
}
