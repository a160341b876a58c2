//! Euclidean and Manhattan reconstruction distances, raw and log-scaled.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Floor applied before taking log10, so an exact-zero distance reports
/// -12 instead of negative infinity.
pub const DISTANCE_LOG_FLOOR: f64 = 1e-12;

/// Distances between a batch and its reconstruction, over the unmasked
/// entries of the flattened matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distances {
    pub euclidean: f64,
    pub manhattan: f64,
    pub euclidean_log10: f64,
    pub manhattan_log10: f64,
}

/// Running sums behind [`Distances`]. Accumulation is example-major (each
/// example's entries are folded in timestep order before moving on), so
/// the result is independent of how a dataset is chunked into batches.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct DistanceAccumulator {
    sum_squares: f64,
    sum_abs: f64,
}

impl DistanceAccumulator {
    /// Folds in one batch: `targets` and `reconstruction` are per-timestep
    /// matrices of identical shape, `mask` is examples x timesteps with
    /// 1.0 marking real steps.
    pub fn observe(
        &mut self,
        targets: &[Array2<f64>],
        reconstruction: &[Array2<f64>],
        mask: &Array2<f64>,
    ) -> Result<(), ModelError> {
        if targets.len() != reconstruction.len() || targets.len() != mask.ncols() {
            return Err(ModelError::ShapeMismatch(format!(
                "{} target steps, {} reconstructed steps, mask has {} columns",
                targets.len(),
                reconstruction.len(),
                mask.ncols()
            )));
        }
        for (step, (target, recon)) in targets.iter().zip(reconstruction).enumerate() {
            if target.raw_dim() != recon.raw_dim() || target.nrows() != mask.nrows() {
                return Err(ModelError::ShapeMismatch(format!(
                    "step {step}: target {:?}, reconstruction {:?}, mask rows {}",
                    target.shape(),
                    recon.shape(),
                    mask.nrows()
                )));
            }
        }
        for example in 0..mask.nrows() {
            for (step, (target, recon)) in targets.iter().zip(reconstruction).enumerate() {
                if mask[[example, step]] == 0.0 {
                    continue;
                }
                for (t, r) in target.row(example).iter().zip(recon.row(example)) {
                    let difference = t - r;
                    self.sum_squares += difference * difference;
                    self.sum_abs += difference.abs();
                }
            }
        }
        Ok(())
    }

    pub fn finish(&self) -> Distances {
        let euclidean = self.sum_squares.sqrt();
        let manhattan = self.sum_abs;
        Distances {
            euclidean,
            manhattan,
            euclidean_log10: euclidean.max(DISTANCE_LOG_FLOOR).log10(),
            manhattan_log10: manhattan.max(DISTANCE_LOG_FLOOR).log10(),
        }
    }
}

/// Euclidean and Manhattan distances between the unmasked entries of a
/// batch and its reconstruction, with log10 variants floored at 1e-12.
pub fn reconstruction_distance(
    targets: &[Array2<f64>],
    reconstruction: &[Array2<f64>],
    mask: &Array2<f64>,
) -> Result<Distances, ModelError> {
    let mut accumulator = DistanceAccumulator::default();
    accumulator.observe(targets, reconstruction, mask)?;
    Ok(accumulator.finish())
}
