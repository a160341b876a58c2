//! One-hot feature assembly and sequence padding.
//!
//! Each timestep becomes a row of width `(num_locations + 1) + 7 + 24`:
//! location classes plus the pad class, then day-of-week (Sunday-based),
//! then hour-of-day. A real step carries exactly three ones (location, day,
//! hour); a padded step carries a single one at the pad slot and nothing in
//! the time blocks.

use ndarray::Array2;

use super::Vocab;
use crate::dataio::SequenceExample;
use crate::error::SpatialError;

pub const DAY_CLASSES: usize = 7;
pub const HOUR_CLASSES: usize = 24;

/// Width of one encoded timestep for a vocabulary of `num_locations` real
/// location classes.
pub fn feature_width(num_locations: usize) -> usize {
    num_locations + 1 + DAY_CLASSES + HOUR_CLASSES
}

/// Encodes one example's context into an `SL x feature_width` matrix.
pub fn one_hot_encode(example: &SequenceExample, vocab: &Vocab) -> Result<Array2<f64>, SpatialError> {
    let num_locations = vocab.num_locations();
    let width = feature_width(num_locations);
    let mut matrix = Array2::zeros((example.context.len(), width));
    for (t, point) in example.context.iter().enumerate() {
        write_one_hot_row(matrix.row_mut(t), point, num_locations)?;
    }
    Ok(matrix)
}

/// Fills one row of a feature matrix. Exposed for batch assembly.
pub(crate) fn write_one_hot_row(
    mut row: ndarray::ArrayViewMut1<f64>,
    point: &crate::dataio::EncodedPoint,
    num_locations: usize,
) -> Result<(), SpatialError> {
    let pad_index = num_locations;
    if point.location > pad_index {
        return Err(SpatialError::BadLocationIndex { index: point.location, classes: num_locations });
    }
    row[point.location] = 1.0;
    if point.location == pad_index {
        return Ok(()); // padded step: location slot only
    }
    if point.day_of_week as usize >= DAY_CLASSES || point.hour_of_day as usize >= HOUR_CLASSES {
        return Err(SpatialError::BadTimeField { day: point.day_of_week, hour: point.hour_of_day });
    }
    row[num_locations + 1 + point.day_of_week as usize] = 1.0;
    row[num_locations + 1 + DAY_CLASSES + point.hour_of_day as usize] = 1.0;
    Ok(())
}

/// Trims or left-pads a sequence to exactly `target_len` elements, keeping
/// the most recent ones when truncating. The mask marks real elements true
/// and padding false.
pub fn pad_truncate<T: Clone>(sequence: &[T], target_len: usize, pad: T) -> (Vec<T>, Vec<bool>) {
    if sequence.len() >= target_len {
        let tail = &sequence[sequence.len() - target_len..];
        (tail.to_vec(), vec![true; target_len])
    } else {
        let pad_count = target_len - sequence.len();
        let mut out = vec![pad; pad_count];
        out.extend_from_slice(sequence);
        let mut mask = vec![false; pad_count];
        mask.extend(std::iter::repeat(true).take(sequence.len()));
        (out, mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{DatasetMeta, EncodedPoint, Trajectory, TrajectoryPoint};
    use crate::spatial::{build_vocab, BoundingBox, Discretizer, GridSpec};

    /// A vocabulary with exactly three real location classes.
    fn three_cell_vocab() -> Vocab {
        let trajectory = Trajectory {
            trajectory_id: "a-2012-W15".into(),
            user_id: "a".into(),
            points: [(0.05, 0.05), (0.15, 0.05), (0.25, 0.05)]
                .iter()
                .map(|&(lat, lon)| TrajectoryPoint {
                    timestamp: chrono::NaiveDateTime::parse_from_str(
                        "2012-04-10T10:00:00",
                        "%Y-%m-%dT%H:%M:%S",
                    )
                    .unwrap(),
                    latitude: lat,
                    longitude: lon,
                    day_of_week: 2,
                    hour_of_day: 10,
                })
                .collect(),
        };
        let ds = crate::dataio::TrajectoryDataset::from_trajectories(
            vec![trajectory],
            DatasetMeta { resolution_minutes: 10, bbox: None },
        );
        let bbox = BoundingBox { min_lat: 0.0, max_lat: 1.0, min_lon: 0.0, max_lon: 1.0 };
        build_vocab(&ds, &Discretizer::Grid(GridSpec::with_cells(bbox, 10, 10).unwrap())).unwrap()
    }

    #[test]
    fn real_step_sets_exactly_the_three_expected_positions() {
        let vocab = three_cell_vocab();
        assert_eq!(vocab.num_locations(), 3);
        // Location class 1, a Tuesday (Sunday-based index 2), 10:00.
        let example = SequenceExample {
            context: vec![EncodedPoint { location: 1, day_of_week: 2, hour_of_day: 10 }],
            next_location: 0,
            user_label: 0,
            sequence_length: 1,
        };
        let matrix = one_hot_encode(&example, &vocab).unwrap();
        assert_eq!(matrix.shape(), [1, 35]);
        let ones: Vec<usize> = matrix
            .row(0)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1.0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(ones, vec![1, 4 + 2, 4 + 7 + 10]);
        assert_eq!(matrix.row(0).sum(), 3.0);
    }

    #[test]
    fn padded_step_sets_only_the_pad_slot() {
        let vocab = three_cell_vocab();
        let example = SequenceExample {
            context: vec![
                EncodedPoint { location: vocab.pad_index(), day_of_week: 0, hour_of_day: 0 },
                EncodedPoint { location: 0, day_of_week: 0, hour_of_day: 0 },
            ],
            next_location: 0,
            user_label: 0,
            sequence_length: 2,
        };
        let matrix = one_hot_encode(&example, &vocab).unwrap();
        assert_eq!(matrix.row(0).sum(), 1.0);
        assert_eq!(matrix[[0, 3]], 1.0);
        assert_eq!(matrix.row(1).sum(), 3.0);
    }

    #[test]
    fn out_of_range_fields_are_rejected() {
        let vocab = three_cell_vocab();
        let bad_location = SequenceExample {
            context: vec![EncodedPoint { location: 7, day_of_week: 0, hour_of_day: 0 }],
            next_location: 0,
            user_label: 0,
            sequence_length: 1,
        };
        assert!(matches!(
            one_hot_encode(&bad_location, &vocab),
            Err(SpatialError::BadLocationIndex { index: 7, classes: 3 })
        ));
        let bad_hour = SequenceExample {
            context: vec![EncodedPoint { location: 0, day_of_week: 0, hour_of_day: 24 }],
            next_location: 0,
            user_label: 0,
            sequence_length: 1,
        };
        assert!(matches!(one_hot_encode(&bad_hour, &vocab), Err(SpatialError::BadTimeField { .. })));
    }

    #[test]
    fn pad_truncate_keeps_the_most_recent_elements() {
        let (kept, mask) = pad_truncate(&[1, 2, 3, 4, 5], 3, 0);
        assert_eq!(kept, vec![3, 4, 5]);
        assert_eq!(mask, vec![true, true, true]);

        let (padded, mask) = pad_truncate(&[1, 2], 5, 0);
        assert_eq!(padded, vec![0, 0, 0, 1, 2]);
        assert_eq!(mask, vec![false, false, false, true, true]);

        let (exact, mask) = pad_truncate(&[1, 2, 3], 3, 0);
        assert_eq!(exact, vec![1, 2, 3]);
        assert!(mask.iter().all(|&m| m));

        let (all_pad, mask) = pad_truncate(&[] as &[i32], 2, 9);
        assert_eq!(all_pad, vec![9, 9]);
        assert!(mask.iter().all(|&m| !m));
    }
}
