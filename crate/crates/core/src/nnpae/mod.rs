//! The adversarial recurrent autoencoder.
//!
//! An encoder turns one-hot trajectory timesteps into a feature sequence;
//! three components consume those features with opposing goals: a mirrored
//! decoder tries to reconstruct the input (modeling a reconstruction
//! attacker), a utility head predicts the next location, and a privacy head
//! tries to re-identify the user. The combined objective weighs the three
//! losses so the encoder learns features that keep prediction easy while
//! making reconstruction and re-identification hard. Standalone single-task
//! variants of each component serve as baselines.

mod grad;
mod layers;
mod loss;
mod model;
mod ops;

pub use grad::{
    decoder_gradient, encoder_objective_gradient, full_gradient, head_gradient, loss_value,
    numeric_gradient, ComponentLosses, LossKind, ModelGrads, ObjectiveCoeffs,
};
pub use layers::{Linear, LinearGrads, Lstm, LstmGrads, LstmTrace};
pub use loss::{
    loss_privacy, loss_reconstruction, loss_sum, loss_utility, LagrangeWeights, LossBreakdown,
    PROBABILITY_FLOOR,
};
pub use model::{
    build_model, build_standalone, ArchConfig, Decoder, Encoder, Head, ModelDims, ModelKind,
    ModelParams, ParamGroup, DEFAULT_EMBEDDING, DEFAULT_HEAD_HIDDEN, DEFAULT_HIDDEN,
};
pub use ops::{make_batch, softmax_rows, Batch, FeatureTensor};

/// Shared fixtures for the unit tests of this module.
#[cfg(test)]
pub(crate) mod testsupport {
    use super::model::ModelDims;
    use crate::dataio::{
        DatasetMeta, SequenceExample, Trajectory, TrajectoryDataset, TrajectoryPoint,
    };
    use crate::spatial::{build_vocab, BoundingBox, Discretizer, GridSpec, Vocab};

    /// Small but non-degenerate widths around a four-location,
    /// three-user vocabulary.
    pub(crate) fn tiny_dims(vocab: &Vocab) -> ModelDims {
        ModelDims {
            input_width: crate::spatial::feature_width(vocab.num_locations()),
            embedding: 5,
            hidden: 8,
            head_hidden: 6,
            num_locations: vocab.num_locations(),
            num_users: vocab.num_users(),
            sequence_length: 3,
        }
    }

    /// Three users cycling through four grid cells; returns the vocabulary
    /// and the full-window examples (sequence length 3).
    pub(crate) fn tiny_world() -> (Vocab, Vec<SequenceExample>) {
        let ts = |h: u32| {
            chrono::NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().and_hms_opt(h, 0, 0).unwrap()
        };
        let mut trajectories = Vec::new();
        for (offset, user) in ["a", "b", "c"].iter().enumerate() {
            let points = (0..6u32)
                .map(|i| TrajectoryPoint {
                    timestamp: ts(i),
                    latitude: 0.05 + 0.1 * ((i as usize + offset) % 4) as f64,
                    longitude: 0.05,
                    day_of_week: 1,
                    hour_of_day: i as u8,
                })
                .collect();
            trajectories.push(Trajectory {
                trajectory_id: format!("{user}-2024-W01"),
                user_id: (*user).into(),
                points,
            });
        }
        let dataset = TrajectoryDataset::from_trajectories(
            trajectories,
            DatasetMeta { resolution_minutes: 60, bbox: None },
        );
        let bbox = BoundingBox { min_lat: 0.0, max_lat: 1.0, min_lon: 0.0, max_lon: 1.0 };
        let discretizer = Discretizer::Grid(GridSpec::with_cells(bbox, 10, 10).unwrap());
        let vocab = build_vocab(&dataset, &discretizer).unwrap();
        let outcome = crate::dataio::make_sequences(&dataset, 3, &vocab, &discretizer).unwrap();
        (vocab, outcome.examples)
    }
}
