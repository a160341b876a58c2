//! Grouping resampled records into user-week trajectories.

use std::collections::BTreeMap;

use chrono::Datelike;

use super::{DatasetMeta, LocationRecord, Trajectory, TrajectoryDataset, TrajectoryPoint};
use crate::error::DataError;

/// Groups records into one trajectory per (user, ISO week), then applies two
/// filters: trajectories shorter than `min_points` are dropped, and users
/// left with fewer than `min_trajectories_per_user` trajectories are dropped
/// entirely. ISO weeks run Monday 00:00 to Sunday 24:00.
///
/// Records must already be resampled; each point keeps its quantized
/// timestamp and gains the derived day-of-week / hour-of-day fields.
pub fn build_trajectories(
    records: &[LocationRecord],
    min_points: usize,
    min_trajectories_per_user: usize,
    meta: DatasetMeta,
) -> Result<TrajectoryDataset, DataError> {
    // (user, iso year, iso week) -> points, ordered by the BTreeMap key so
    // output order is independent of input interleaving.
    let mut groups: BTreeMap<(String, i32, u32), Vec<TrajectoryPoint>> = BTreeMap::new();
    for record in records {
        let week = record.timestamp.date().iso_week();
        groups
            .entry((record.user_id.clone(), week.year(), week.week()))
            .or_default()
            .push(TrajectoryPoint::from_record(record));
    }
    let groups_total = groups.len();

    let mut dropped_short = 0usize;
    let mut per_user: BTreeMap<String, Vec<Trajectory>> = BTreeMap::new();
    for ((user, year, week), mut points) in groups {
        if points.len() < min_points {
            dropped_short += 1;
            continue;
        }
        points.sort_by_key(|p| p.timestamp);
        let trajectory_id = format!("{user}-{year}-W{week:02}");
        per_user
            .entry(user.clone())
            .or_default()
            .push(Trajectory { trajectory_id, user_id: user, points });
    }

    let users_total = per_user.len();
    let mut users_dropped = 0usize;
    let mut trajectories = Vec::new();
    for (_, user_trajectories) in per_user {
        if user_trajectories.len() < min_trajectories_per_user {
            users_dropped += 1;
            continue;
        }
        trajectories.extend(user_trajectories);
    }

    if trajectories.is_empty() {
        return Err(DataError::AllFiltered {
            groups: groups_total,
            dropped_short,
            min_points,
            users: users_total,
            users_dropped,
            min_trajectories: min_trajectories_per_user,
        });
    }
    Ok(TrajectoryDataset::from_trajectories(trajectories, meta))
}
