//! Batch assembly and forward passes through the model components.
//!
//! A [`Batch`] is time-major: `inputs[t]` is the `(batch, input_width)`
//! one-hot matrix for timestep `t`. The mask is `(batch, steps)` with 1.0 on
//! real timesteps and 0.0 on padding; the recurrence still runs over padded
//! steps (they carry the pad one-hot), masking happens in the losses.

use ndarray::Array2;

use super::layers::LstmTrace;
use super::model::ModelParams;
use crate::dataio::SequenceExample;
use crate::error::ModelError;
use crate::spatial::{write_one_hot_row, Vocab};

/// One assembled mini-batch.
#[derive(Debug, Clone)]
pub struct Batch {
    /// Time-major one-hot inputs, `steps` matrices of `(batch, input_width)`.
    pub inputs: Vec<Array2<f64>>,
    /// `(batch, steps)`; 1.0 marks a real timestep.
    pub mask: Array2<f64>,
    /// Next-location class per example.
    pub next_labels: Vec<usize>,
    /// User class per example.
    pub user_labels: Vec<usize>,
}

impl Batch {
    pub fn batch_size(&self) -> usize {
        self.next_labels.len()
    }

    pub fn steps(&self) -> usize {
        self.inputs.len()
    }
}

/// Assembles the examples at `indices` into a batch against `vocab`.
/// Padded context steps (pad location class) get a zero mask entry.
pub fn make_batch(
    examples: &[SequenceExample],
    indices: &[usize],
    vocab: &Vocab,
) -> Result<Batch, ModelError> {
    let steps = examples
        .get(indices.first().copied().unwrap_or(0))
        .map_or(0, |e| e.context.len());
    let width = crate::spatial::feature_width(vocab.num_locations());
    let batch = indices.len();
    let mut inputs = vec![Array2::zeros((batch, width)); steps];
    let mut mask = Array2::zeros((batch, steps));
    let mut next_labels = Vec::with_capacity(batch);
    let mut user_labels = Vec::with_capacity(batch);
    for (row, &index) in indices.iter().enumerate() {
        let example = &examples[index];
        if example.context.len() != steps {
            return Err(ModelError::ShapeMismatch(format!(
                "example {index} has {} context steps, batch expects {steps}",
                example.context.len()
            )));
        }
        if example.next_location >= vocab.num_locations() {
            return Err(ModelError::LabelOutOfRange {
                label: example.next_location,
                classes: vocab.num_locations(),
            });
        }
        if example.user_label >= vocab.num_users() {
            return Err(ModelError::LabelOutOfRange {
                label: example.user_label,
                classes: vocab.num_users(),
            });
        }
        for (t, point) in example.context.iter().enumerate() {
            write_one_hot_row(inputs[t].row_mut(row), point, vocab.num_locations())?;
            if point.location != vocab.pad_index() {
                mask[[row, t]] = 1.0;
            }
        }
        next_labels.push(example.next_location);
        user_labels.push(example.user_label);
    }
    Ok(Batch { inputs, mask, next_labels, user_labels })
}

/// Per-timestep encoder features with the batch's pad mask.
#[derive(Debug, Clone)]
pub struct FeatureTensor {
    /// Time-major features, `steps` matrices of `(batch, hidden)`.
    pub steps: Vec<Array2<f64>>,
    /// `(batch, steps)`; copied from the source batch.
    pub mask: Array2<f64>,
}

/// Forward activations of the encoder, kept for backpropagation.
pub(crate) struct EncoderTrace {
    pub embedded: Vec<Array2<f64>>,
    pub lstm: LstmTrace,
}

/// Forward activations of the decoder, kept for backpropagation.
pub(crate) struct DecoderTrace {
    pub lstm: LstmTrace,
    pub reconstruction: Vec<Array2<f64>>,
}

/// Forward activations of a classifier head, kept for backpropagation.
pub(crate) struct HeadTrace {
    pub lstm: LstmTrace,
    pub probabilities: Array2<f64>,
}

/// Row-wise softmax, stabilized by subtracting each row's maximum.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

fn check_finite(steps: &[Array2<f64>], what: &'static str) -> Result<(), ModelError> {
    for (t, step) in steps.iter().enumerate() {
        if let Some((index, _)) = step.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(ModelError::NonFinite {
                what,
                location: format!("timestep {t}, entry ({}, {})", index.0, index.1),
            });
        }
    }
    Ok(())
}

impl ModelParams {
    pub(crate) fn encode_traced(&self, batch: &Batch) -> EncoderTrace {
        let embedded = self.encoder.embed.forward_seq(&batch.inputs);
        let lstm = self.encoder.lstm.forward(&embedded);
        EncoderTrace { embedded, lstm }
    }

    /// Runs the encoder over a batch and returns the per-timestep feature
    /// sequence.
    pub fn encode(&self, batch: &Batch) -> Result<FeatureTensor, ModelError> {
        let trace = self.encode_traced(batch);
        check_finite(&trace.lstm.hidden, "encoder features")?;
        Ok(FeatureTensor { steps: trace.lstm.hidden, mask: batch.mask.clone() })
    }

    pub(crate) fn decode_traced(&self, features: &FeatureTensor) -> Result<DecoderTrace, ModelError> {
        let decoder = self
            .decoder
            .as_ref()
            .ok_or(ModelError::MissingComponent { component: "decoder" })?;
        let lstm = decoder.lstm.forward(&features.steps);
        let reconstruction = decoder.project.forward_seq(&lstm.hidden);
        Ok(DecoderTrace { lstm, reconstruction })
    }

    /// Reconstructs the one-hot input sequence from features; output shape
    /// matches the original batch inputs.
    pub fn decode(&self, features: &FeatureTensor) -> Result<Vec<Array2<f64>>, ModelError> {
        let trace = self.decode_traced(features)?;
        check_finite(&trace.reconstruction, "reconstruction")?;
        Ok(trace.reconstruction)
    }

    pub(crate) fn head_traced(
        &self,
        features: &FeatureTensor,
        utility: bool,
    ) -> Result<HeadTrace, ModelError> {
        let head = if utility {
            self.utility.as_ref().ok_or(ModelError::MissingComponent { component: "utility head" })?
        } else {
            self.privacy.as_ref().ok_or(ModelError::MissingComponent { component: "privacy head" })?
        };
        let lstm = head.lstm.forward(&features.steps);
        let last = lstm.hidden.last().ok_or_else(|| {
            ModelError::ShapeMismatch("head received an empty feature sequence".into())
        })?;
        let logits = head.project.forward(last);
        if let Some((index, _)) = logits.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(ModelError::NonFinite {
                what: if utility { "next-location logits" } else { "re-identification logits" },
                location: format!("entry ({}, {})", index.0, index.1),
            });
        }
        Ok(HeadTrace { lstm, probabilities: softmax_rows(&logits) })
    }

    /// Probability rows over the location classes for each example.
    pub fn predict_next(&self, features: &FeatureTensor) -> Result<Array2<f64>, ModelError> {
        Ok(self.head_traced(features, true)?.probabilities)
    }

    /// Probability rows over the user classes for each example.
    pub fn reidentify(&self, features: &FeatureTensor) -> Result<Array2<f64>, ModelError> {
        Ok(self.head_traced(features, false)?.probabilities)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::EncodedPoint;
    use crate::nnpae::model::{build_model, ModelKind};
    use crate::nnpae::testsupport::{tiny_dims, tiny_world};

    #[test]
    fn batch_shapes_and_mask_follow_the_examples() {
        let (vocab, examples) = tiny_world();
        let batch = make_batch(&examples, &[0, 1, 2], &vocab).unwrap();
        assert_eq!(batch.steps(), 3);
        assert_eq!(batch.batch_size(), 3);
        assert_eq!(batch.inputs[0].ncols(), crate::spatial::feature_width(vocab.num_locations()));
        // Full windows have no padding.
        assert_eq!(batch.mask.sum(), 9.0);
    }

    #[test]
    fn padded_context_rows_get_zero_mask() {
        let (vocab, mut examples) = tiny_world();
        examples[0].context[0] =
            EncodedPoint { location: vocab.pad_index(), day_of_week: 0, hour_of_day: 0 };
        examples[0].sequence_length = 2;
        let batch = make_batch(&examples, &[0], &vocab).unwrap();
        assert_eq!(batch.mask[[0, 0]], 0.0);
        assert_eq!(batch.mask[[0, 1]], 1.0);
    }

    #[test]
    fn encode_is_deterministic_and_shaped() {
        let (vocab, examples) = tiny_world();
        let model = build_model(ModelKind::Pae, &tiny_dims(&vocab), 42);
        let batch = make_batch(&examples, &[0, 1], &vocab).unwrap();
        let f1 = model.encode(&batch).unwrap();
        let f2 = model.encode(&batch).unwrap();
        assert_eq!(f1.steps.len(), 3);
        assert_eq!(f1.steps[0].raw_dim(), ndarray::Dim([2, 8]));
        for (a, b) in f1.steps.iter().zip(&f2.steps) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn decode_matches_input_shape_and_heads_normalize() {
        let (vocab, examples) = tiny_world();
        let model = build_model(ModelKind::Pae, &tiny_dims(&vocab), 42);
        let batch = make_batch(&examples, &[0, 1, 3], &vocab).unwrap();
        let features = model.encode(&batch).unwrap();
        let reconstruction = model.decode(&features).unwrap();
        assert_eq!(reconstruction.len(), batch.steps());
        assert_eq!(reconstruction[0].raw_dim(), batch.inputs[0].raw_dim());
        for probs in [model.predict_next(&features).unwrap(), model.reidentify(&features).unwrap()]
        {
            for row in probs.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-6);
                assert!(row.iter().all(|&p| p >= 0.0));
            }
        }
    }

    #[test]
    fn softmax_of_zero_logits_is_uniform_and_single_class_is_one() {
        let uniform = softmax_rows(&Array2::zeros((2, 5)));
        for row in uniform.rows() {
            for &p in row {
                assert!((p - 0.2).abs() < 1e-12);
            }
        }
        let single = softmax_rows(&Array2::from_elem((3, 1), -4.2));
        assert!(single.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn missing_components_are_reported() {
        let (vocab, examples) = tiny_world();
        let model = build_model(ModelKind::StandalonePredictor, &tiny_dims(&vocab), 42);
        let batch = make_batch(&examples, &[0], &vocab).unwrap();
        let features = model.encode(&batch).unwrap();
        assert!(matches!(
            model.decode(&features),
            Err(ModelError::MissingComponent { component: "decoder" })
        ));
        assert!(matches!(
            model.reidentify(&features),
            Err(ModelError::MissingComponent { component: "privacy head" })
        ));
    }

    #[test]
    fn out_of_range_labels_are_rejected() {
        let (vocab, mut examples) = tiny_world();
        examples[0].next_location = vocab.num_locations() + 3;
        assert!(matches!(
            make_batch(&examples, &[0], &vocab),
            Err(ModelError::LabelOutOfRange { .. })
        ));
    }
}
