//! Seeded, per-user stratified splitting.

use rand::seq::SliceRandom;

use super::{SequenceExample, TrajectoryDataset};
use crate::error::DataError;
use crate::seeding::rng_for;

/// Splits a dataset into train/test at the trajectory level, stratified per
/// user: each user's trajectories are shuffled with a generator derived from
/// `seed` and that user's id, then assigned so the user keeps at least one
/// trajectory on each side and the train share is the closest achievable to
/// `train_fraction`.
///
/// Users with a single trajectory cannot satisfy the both-sides guarantee and
/// are rejected.
pub fn train_test_split(
    dataset: &TrajectoryDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(TrajectoryDataset, TrajectoryDataset), DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::BadFraction(train_fraction));
    }
    if dataset.trajectories.is_empty() {
        return Err(DataError::EmptyDataset);
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (user, indices) in &dataset.user_index {
        let n = indices.len();
        if n < 2 {
            return Err(DataError::UnsplittableUser { user: user.clone(), count: n });
        }
        let mut shuffled = indices.clone();
        let mut rng = rng_for(seed, &format!("split/user/{user}"));
        shuffled.shuffle(&mut rng);
        let ideal = (train_fraction * n as f64).round() as usize;
        let n_train = ideal.clamp(1, n - 1);
        for (rank, &index) in shuffled.iter().enumerate() {
            let trajectory = dataset.trajectories[index].clone();
            if rank < n_train {
                train.push(trajectory);
            } else {
                test.push(trajectory);
            }
        }
    }
    // Deterministic output order regardless of shuffle outcomes.
    train.sort_by(|a, b| a.trajectory_id.cmp(&b.trajectory_id));
    test.sort_by(|a, b| a.trajectory_id.cmp(&b.trajectory_id));
    Ok((
        TrajectoryDataset::from_trajectories(train, dataset.meta.clone()),
        TrajectoryDataset::from_trajectories(test, dataset.meta.clone()),
    ))
}

/// Carves a validation slice out of a training example list, shuffling with
/// the named sub-seed so the carve is independent of example order quirks.
/// With `fraction` of 0, or too few examples to give both sides at least one
/// element, everything stays in train and validation comes back empty.
pub fn split_validation(
    examples: Vec<SequenceExample>,
    fraction: f64,
    seed: u64,
) -> (Vec<SequenceExample>, Vec<SequenceExample>) {
    let n = examples.len();
    let n_val = (fraction * n as f64).round() as usize;
    if n_val == 0 || n_val >= n {
        return (examples, Vec::new());
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_for(seed, "split/validation");
    order.shuffle(&mut rng);
    let mut examples: Vec<Option<SequenceExample>> = examples.into_iter().map(Some).collect();
    let mut val = Vec::with_capacity(n_val);
    let mut train = Vec::with_capacity(n - n_val);
    for (rank, &index) in order.iter().enumerate() {
        let example = examples[index].take().expect("each index visited once");
        if rank < n_val {
            val.push(example);
        } else {
            train.push(example);
        }
    }
    (train, val)
}
