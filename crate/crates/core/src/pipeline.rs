//! One-call preparation of raw location records into model-ready examples.
//!
//! The individual stages (bounding-box filter, temporal resampling,
//! trajectory assembly, splitting, vocabulary fitting, windowing) each live
//! in `dataio` or `spatial`; this module chains them in the one order that
//! keeps the contract honest: the vocabulary is fitted on the **train**
//! trajectories only, so test windows touching unseen cells are dropped
//! rather than leaked into the class space.

use serde::{Deserialize, Serialize};

use crate::dataio::{
    build_trajectories, make_sequences, resample_to_resolution, split_validation,
    train_test_split, DatasetMeta, LocationRecord, SequenceExample, SequenceOutcome,
};
use crate::error::PipelineError;
use crate::spatial::{build_vocab, filter_bbox, BoundingBox, Discretizer, Vocab};

/// Knobs for the record-to-example pass. Deserializes with every field
/// optional so experiment files only name what they change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrepConfig {
    /// Temporal resolution records are resampled to, in minutes.
    pub resolution_minutes: u32,
    /// Minimum points a user-week must keep to survive as a trajectory.
    pub min_points: usize,
    /// Minimum surviving trajectories a user needs to stay in the dataset.
    pub min_trajectories_per_user: usize,
    /// Share of each user's trajectories assigned to the train side.
    pub train_fraction: f64,
    /// Share of train examples carved off for convergence monitoring.
    pub validation_fraction: f64,
    /// Optional spatial crop applied before anything else.
    pub bbox: Option<BoundingBox>,
    /// How coordinates become discrete location classes.
    pub discretizer: Discretizer,
    /// Number of context points per supervised example.
    pub sequence_length: usize,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            resolution_minutes: 10,
            min_points: 10,
            min_trajectories_per_user: 2,
            train_fraction: 0.7,
            validation_fraction: 0.1,
            bbox: None,
            discretizer: Discretizer::Geohash { precision: 6 },
            sequence_length: 10,
        }
    }
}

impl PrepConfig {
    /// Rejects values the downstream stages would choke on, with the field
    /// name attached so config errors point at the line to fix.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |field, problem| Err(PipelineError::BadConfig { field, problem });
        if self.resolution_minutes == 0 {
            return bad("resolution_minutes", "must be at least 1");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction", "must lie strictly between 0 and 1");
        }
        if !(self.validation_fraction >= 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction", "must lie in [0, 1)");
        }
        if self.sequence_length == 0 {
            return bad("sequence_length", "must be at least 1");
        }
        if let Some(bbox) = &self.bbox {
            bbox.validate()?;
        }
        Ok(())
    }
}

/// Record and drop counts from one preparation pass, kept for run manifests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepStats {
    pub records_in: usize,
    pub records_after_bbox: usize,
    pub records_after_resample: usize,
    pub trajectories_train: usize,
    pub trajectories_test: usize,
    /// Train windows dropped for unseen cells, out-of-bounds points, or
    /// unknown users (can only happen when the discretizer rejects points).
    pub windows_dropped_train: usize,
    /// Test windows dropped for the same reasons; unseen cells are expected
    /// here since the vocabulary never saw the test trajectories.
    pub windows_dropped_test: usize,
}

/// Everything a training or evaluation run needs, produced in one pass.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub vocab: Vocab,
    pub train: Vec<SequenceExample>,
    pub validation: Vec<SequenceExample>,
    pub test: Vec<SequenceExample>,
    pub stats: PrepStats,
}

/// Runs the full pass: crop → resample → assemble trajectories → per-user
/// train/test split → fit vocabulary on the train side → window both sides →
/// carve validation examples out of train.
///
/// `seed` drives the split shuffles and the validation carve; everything
/// else is deterministic in the input order.
pub fn prepare(
    records: &[LocationRecord],
    config: &PrepConfig,
    seed: u64,
) -> Result<PreparedData, PipelineError> {
    config.validate()?;

    let cropped: Vec<LocationRecord> = match &config.bbox {
        Some(bbox) => filter_bbox(records, bbox)?,
        None => records.to_vec(),
    };
    let resampled = resample_to_resolution(&cropped, config.resolution_minutes)?;
    let meta = DatasetMeta {
        resolution_minutes: config.resolution_minutes,
        bbox: config.bbox,
    };
    let dataset = build_trajectories(
        &resampled,
        config.min_points,
        config.min_trajectories_per_user,
        meta,
    )?;
    let (train_set, test_set) = train_test_split(&dataset, config.train_fraction, seed)?;

    let vocab = build_vocab(&train_set, &config.discretizer)?;
    // No train examples is fatal (nothing to fit), but an all-dropped test
    // side only means evaluation will have nothing to chew on — a training
    // run can still proceed, so it degrades to an empty list.
    let train_out = make_sequences(&train_set, config.sequence_length, &vocab, &config.discretizer)?;
    let test_out = match make_sequences(&test_set, config.sequence_length, &vocab, &config.discretizer) {
        Ok(outcome) => outcome,
        Err(crate::error::DataError::NoSequences { .. }) => SequenceOutcome::default(),
        Err(other) => return Err(other.into()),
    };

    let stats = PrepStats {
        records_in: records.len(),
        records_after_bbox: cropped.len(),
        records_after_resample: resampled.len(),
        trajectories_train: train_set.trajectories.len(),
        trajectories_test: test_set.trajectories.len(),
        windows_dropped_train: dropped_total(&train_out),
        windows_dropped_test: dropped_total(&test_out),
    };
    let (train, validation) = split_validation(train_out.examples, config.validation_fraction, seed);

    Ok(PreparedData {
        vocab,
        train,
        validation,
        test: test_out.examples,
        stats,
    })
}

/// Windows a record set against an **existing** vocabulary — the path used
/// when applying a trained model to new data: the checkpoint fixes the class
/// space, so fresh cells are dropped, never appended.
///
/// Runs crop → resample → assemble → window with no splitting.
pub fn prepare_examples(
    records: &[LocationRecord],
    config: &PrepConfig,
    vocab: &Vocab,
) -> Result<SequenceOutcome, PipelineError> {
    config.validate()?;
    let cropped: Vec<LocationRecord> = match &config.bbox {
        Some(bbox) => filter_bbox(records, bbox)?,
        None => records.to_vec(),
    };
    let resampled = resample_to_resolution(&cropped, config.resolution_minutes)?;
    let meta = DatasetMeta {
        resolution_minutes: config.resolution_minutes,
        bbox: config.bbox,
    };
    let dataset = build_trajectories(
        &resampled,
        config.min_points,
        config.min_trajectories_per_user,
        meta,
    )?;
    Ok(make_sequences(&dataset, config.sequence_length, vocab, &config.discretizer)?)
}

fn dropped_total(outcome: &SequenceOutcome) -> usize {
    outcome.dropped_unseen_cell + outcome.dropped_out_of_bounds + outcome.dropped_unknown_user
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_synthetic, SyntheticConfig};

    fn world_config(seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            num_users: 4,
            num_anchor_pois_per_user: 3,
            total_pois: 8,
            days: 21,
            resolution_minutes: 60,
            transition_noise: 0.1,
            bbox: BoundingBox {
                min_lat: 46.50,
                max_lat: 46.61,
                min_lon: 6.58,
                max_lon: 6.73,
            },
            seed,
        }
    }

    fn prep_config() -> PrepConfig {
        PrepConfig {
            resolution_minutes: 60,
            min_points: 10,
            min_trajectories_per_user: 2,
            sequence_length: 5,
            discretizer: Discretizer::Geohash { precision: 7 },
            ..PrepConfig::default()
        }
    }

    #[test]
    fn full_pass_yields_all_three_splits_with_closed_vocabulary() {
        let records = generate_synthetic(&world_config(7)).unwrap();
        let prepared = prepare(&records, &prep_config(), 11).unwrap();

        assert!(!prepared.train.is_empty());
        assert!(!prepared.validation.is_empty());
        assert!(!prepared.test.is_empty());

        // Every surviving example references only classes the vocabulary
        // defines — windowing must have dropped anything else.
        let classes = prepared.vocab.num_locations();
        let users = prepared.vocab.num_users();
        for example in prepared
            .train
            .iter()
            .chain(&prepared.validation)
            .chain(&prepared.test)
        {
            assert_eq!(example.sequence_length, 5);
            assert_eq!(example.context.len(), 5);
            assert!(example.next_location < classes);
            assert!(example.user_label < users);
            assert!(example.context.iter().all(|p| p.location < classes));
        }
    }

    #[test]
    fn pipeline_matches_hand_composed_stages() {
        // The pipeline must be exactly the composition of its public stages;
        // in particular the vocabulary has to come from the train side of
        // the split, not from the full dataset.
        let records = generate_synthetic(&world_config(3)).unwrap();
        let config = prep_config();
        let seed = 5;
        let prepared = prepare(&records, &config, seed).unwrap();

        let resampled = resample_to_resolution(&records, config.resolution_minutes).unwrap();
        let meta = DatasetMeta {
            resolution_minutes: config.resolution_minutes,
            bbox: None,
        };
        let dataset = build_trajectories(
            &resampled,
            config.min_points,
            config.min_trajectories_per_user,
            meta,
        )
        .unwrap();
        let (train_set, test_set) =
            train_test_split(&dataset, config.train_fraction, seed).unwrap();
        let vocab = build_vocab(&train_set, &config.discretizer).unwrap();
        assert_eq!(prepared.vocab.sha256(), vocab.sha256());

        let train_out =
            make_sequences(&train_set, config.sequence_length, &vocab, &config.discretizer)
                .unwrap();
        let test_out =
            make_sequences(&test_set, config.sequence_length, &vocab, &config.discretizer)
                .unwrap();
        let (train, validation) =
            split_validation(train_out.examples, config.validation_fraction, seed);
        assert_eq!(prepared.train, train);
        assert_eq!(prepared.validation, validation);
        assert_eq!(prepared.test, test_out.examples);
    }

    #[test]
    fn same_seed_reproduces_byte_identical_outputs() {
        let records = generate_synthetic(&world_config(9)).unwrap();
        let config = prep_config();
        let a = prepare(&records, &config, 42).unwrap();
        let b = prepare(&records, &config, 42).unwrap();
        assert_eq!(a.vocab.sha256(), b.vocab.sha256());
        assert_eq!(a.train, b.train);
        assert_eq!(a.validation, b.validation);
        assert_eq!(a.test, b.test);
        assert_eq!(a.stats, b.stats);

        // A different seed shuffles the split differently.
        let c = prepare(&records, &config, 43).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn bbox_crop_happens_before_everything_else() {
        let records = generate_synthetic(&world_config(1)).unwrap();
        // A crop that keeps only the southern half of the world.
        let config = PrepConfig {
            bbox: Some(BoundingBox {
                min_lat: 46.50,
                max_lat: 46.555,
                min_lon: 6.58,
                max_lon: 6.73,
            }),
            ..prep_config()
        };
        match prepare(&records, &config, 2) {
            Ok(prepared) => {
                assert!(prepared.stats.records_after_bbox < prepared.stats.records_in);
            }
            // Cropping half the world may legitimately starve the filters;
            // the point is that the crop ran first, which the error proves.
            Err(PipelineError::Data(_)) => {}
            Err(other) => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn oversized_sequence_length_is_a_clear_error() {
        let records = generate_synthetic(&world_config(4)).unwrap();
        let config = PrepConfig {
            sequence_length: 10_000,
            ..prep_config()
        };
        let err = prepare(&records, &config, 0).unwrap_err();
        assert!(matches!(
            err,
            PipelineError::Data(crate::error::DataError::NoSequences { .. })
        ));
    }

    #[test]
    fn config_validation_names_the_offending_field() {
        let records: Vec<LocationRecord> = Vec::new();
        let config = PrepConfig {
            train_fraction: 1.0,
            ..PrepConfig::default()
        };
        let err = prepare(&records, &config, 0).unwrap_err();
        assert!(err.to_string().contains("train_fraction"));

        let config = PrepConfig {
            validation_fraction: 1.0,
            ..PrepConfig::default()
        };
        let err = prepare(&records, &config, 0).unwrap_err();
        assert!(err.to_string().contains("validation_fraction"));
    }

    #[test]
    fn default_config_round_trips_through_json_and_rejects_unknown_fields() {
        let config = PrepConfig::default();
        let json = serde_json::to_string(&config).unwrap();
        let back: PrepConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(config, back);

        // Partial configs fill in defaults.
        let partial: PrepConfig = serde_json::from_str(r#"{"sequence_length": 5}"#).unwrap();
        assert_eq!(partial.sequence_length, 5);
        assert_eq!(partial.resolution_minutes, 10);

        let err = serde_json::from_str::<PrepConfig>(r#"{"sequence_len": 5}"#);
        assert!(err.is_err());
    }

    #[test]
    fn windowing_against_a_foreign_vocabulary_drops_unseen_cells() {
        let records = generate_synthetic(&world_config(6)).unwrap();
        let config = prep_config();
        let prepared = prepare(&records, &config, 1).unwrap();

        // Re-window the same records using the fitted vocabulary: every
        // window over a train-side cell survives, anything else is counted.
        let outcome = prepare_examples(&records, &config, &prepared.vocab).unwrap();
        assert_eq!(
            outcome.examples.len() + outcome.dropped_unseen_cell + outcome.dropped_out_of_bounds
                + outcome.dropped_unknown_user,
            outcome.windows_total
        );
        for example in &outcome.examples {
            assert!(example.next_location < prepared.vocab.num_locations());
        }
    }
}
