//! Synthetic trajectory generation with known ground truth.
//!
//! Each user lives on a private set of anchor points and walks between them
//! under an hour-of-day-dependent schedule, so next-location structure and
//! user identity are both present in the data by construction. Because
//! anchors are sampled as fresh continuous coordinates, distinct users get
//! distinct anchor sets with probability one, which is what makes
//! re-identification learnable (and lets a nearest-anchor classifier serve
//! as a ground-truth upper bound in tests).

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDateTime, Timelike};
use rand::Rng;

use super::LocationRecord;
use crate::error::DataError;
use crate::seeding::rng_for;
use crate::spatial::BoundingBox;

/// Knobs for the generator. `total_pois` sizes a shared pool of public
/// places; a walker teleports to a uniformly random pool member with
/// probability `transition_noise` per step, otherwise it follows its private
/// anchor schedule.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub num_users: usize,
    pub num_anchor_pois_per_user: usize,
    pub total_pois: usize,
    pub days: u32,
    pub resolution_minutes: u32,
    pub transition_noise: f64,
    pub bbox: BoundingBox,
    pub seed: u64,
}

/// Generated records plus the ground truth behind them.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub records: Vec<LocationRecord>,
    /// Per-user anchor coordinates, keyed by user id.
    pub anchors: BTreeMap<String, Vec<(f64, f64)>>,
    /// The shared pool excursions jump to.
    pub pool: Vec<(f64, f64)>,
}

/// Probability of moving to the scheduled anchor (rather than staying put)
/// on any non-excursion step.
const MOVE_PROBABILITY: f64 = 0.8;

/// Generation starts on a Monday so `days = 7 * k` spans exactly `k` ISO weeks.
const START: &str = "2024-01-01T00:00:00";

impl SyntheticConfig {
    fn validate(&self) -> Result<(), DataError> {
        let fail = |msg: String| Err(DataError::BadSyntheticConfig(msg));
        if self.num_users == 0 {
            return fail("num_users must be at least 1".into());
        }
        if self.num_anchor_pois_per_user == 0 {
            return fail("num_anchor_pois_per_user must be at least 1".into());
        }
        if self.total_pois < self.num_anchor_pois_per_user {
            return fail(format!(
                "total_pois ({}) must be at least num_anchor_pois_per_user ({})",
                self.total_pois, self.num_anchor_pois_per_user
            ));
        }
        if self.days == 0 {
            return fail("days must be at least 1".into());
        }
        if self.resolution_minutes == 0 {
            return fail("resolution_minutes must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.transition_noise) || !self.transition_noise.is_finite() {
            return fail(format!("transition_noise must lie in [0, 1], got {}", self.transition_noise));
        }
        self.bbox
            .validate()
            .map_err(|e| DataError::BadSyntheticConfig(e.to_string()))?;
        Ok(())
    }
}

impl SyntheticWorld {
    /// Generates the full world. Deterministic: the same config (including
    /// seed) always produces byte-identical records.
    pub fn generate(config: &SyntheticConfig) -> Result<SyntheticWorld, DataError> {
        config.validate()?;
        let mut rng = rng_for(config.seed, "synth");
        let uniform_point = |rng: &mut rand_chacha::ChaCha20Rng| -> (f64, f64) {
            let lat = rng.gen_range(config.bbox.min_lat..=config.bbox.max_lat);
            let lon = rng.gen_range(config.bbox.min_lon..=config.bbox.max_lon);
            (lat, lon)
        };

        let pool: Vec<(f64, f64)> = (0..config.total_pois).map(|_| uniform_point(&mut rng)).collect();

        let start: NaiveDateTime = NaiveDateTime::parse_from_str(START, "%Y-%m-%dT%H:%M:%S")
            .expect("START is well-formed");
        let steps = (config.days as i64 * 24 * 60) / config.resolution_minutes as i64;
        let k = config.num_anchor_pois_per_user;

        let mut records = Vec::new();
        let mut anchors = BTreeMap::new();
        for user in 0..config.num_users {
            let user_id = format!("u{user:03}");
            let user_anchors: Vec<(f64, f64)> = (0..k).map(|_| uniform_point(&mut rng)).collect();

            // Hour-of-day schedule: the day is cut into k contiguous blocks,
            // each pointing at one anchor, in a per-user shuffled order.
            let mut order: Vec<usize> = (0..k).collect();
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            let schedule: Vec<usize> = (0..24).map(|h| order[(h * k / 24).min(k - 1)]).collect();

            let mut state = schedule[0];
            for step in 0..steps {
                let timestamp = start + Duration::minutes(step * config.resolution_minutes as i64);
                let (latitude, longitude) = if rng.gen::<f64>() < config.transition_noise {
                    // Excursion to a public place; the walk state is untouched.
                    pool[rng.gen_range(0..pool.len())]
                } else {
                    if rng.gen::<f64>() < MOVE_PROBABILITY {
                        state = schedule[timestamp.hour() as usize];
                    }
                    user_anchors[state]
                };
                records.push(LocationRecord {
                    user_id: user_id.clone(),
                    timestamp,
                    latitude,
                    longitude,
                    extras: BTreeMap::new(),
                });
            }
            anchors.insert(user_id, user_anchors);
        }
        Ok(SyntheticWorld { records, anchors, pool })
    }
}

/// Generates just the records; see [`SyntheticWorld`] for ground truth access.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Vec<LocationRecord>, DataError> {
    Ok(SyntheticWorld::generate(config)?.records)
}
