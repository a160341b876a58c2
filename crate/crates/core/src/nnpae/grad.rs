//! Analytic gradients of the component losses and the combined objective.
//!
//! Training alternates between updating one component on its own loss (the
//! encoder frozen) and updating the encoder on the weighted combination, so
//! the entry points here come in two shapes: per-component gradients that
//! stop at the feature sequence, and encoder gradients that continue the
//! chain through the embedding. [`full_gradient`] assembles the complete
//! gradient field of any loss for verification against
//! [`numeric_gradient`], a central finite difference over the same forward
//! pass.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::loss::{loss_reconstruction, loss_sum, LagrangeWeights, PROBABILITY_FLOOR};
use super::model::{ModelKind, ModelParams, ParamGroup};
use super::ops::{Batch, FeatureTensor};
use crate::error::ModelError;

/// Which loss a gradient or value is taken of.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Reconstruction,
    Utility,
    Privacy,
    Weighted(LagrangeWeights),
}

/// Sensitivity of the encoder's objective to each component loss: the
/// encoder step minimizes
/// `reconstruction * L_R + utility * L_U + privacy * L_P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveCoeffs {
    pub reconstruction: f64,
    pub utility: f64,
    pub privacy: f64,
}

impl ObjectiveCoeffs {
    /// The adversarial combination: reconstruction and re-identification
    /// maximized, prediction minimized.
    pub fn adversarial(weights: &LagrangeWeights) -> ObjectiveCoeffs {
        ObjectiveCoeffs {
            reconstruction: -weights.lambda1,
            utility: weights.lambda2,
            privacy: -weights.lambda3,
        }
    }

    /// Unit coefficient on the single loss a standalone baseline minimizes.
    pub fn single(kind: ModelKind) -> ObjectiveCoeffs {
        let (reconstruction, utility, privacy) = match kind {
            ModelKind::StandaloneAutoencoder => (1.0, 0.0, 0.0),
            ModelKind::StandalonePredictor => (0.0, 1.0, 0.0),
            ModelKind::StandaloneReidentifier => (0.0, 0.0, 1.0),
            ModelKind::Pae => (0.0, 0.0, 0.0),
        };
        debug_assert_ne!(kind, ModelKind::Pae, "the full model trains on weighted coefficients");
        ObjectiveCoeffs { reconstruction, utility, privacy }
    }
}

/// Component losses measured during one backward pass; components that were
/// skipped (zero coefficient or absent) read 0.0.
#[derive(Debug, Clone, Copy, Default)]
pub struct ComponentLosses {
    pub l_r: f64,
    pub l_u: f64,
    pub l_p: f64,
}

/// Gradients for every present parameter group, aligned tensor-for-tensor
/// with [`ModelParams::tensors`].
#[derive(Debug, Clone)]
pub struct ModelGrads {
    groups: Vec<(ParamGroup, Vec<Array2<f64>>)>,
}

impl ModelGrads {
    /// Zero gradients shaped like the model's present groups.
    pub fn zeros_like(params: &ModelParams) -> ModelGrads {
        let groups = params
            .groups()
            .into_iter()
            .map(|g| {
                let zeros = params
                    .tensors(g)
                    .iter()
                    .map(|(_, t)| Array2::zeros(t.raw_dim()))
                    .collect();
                (g, zeros)
            })
            .collect();
        ModelGrads { groups }
    }

    pub fn set_group(&mut self, group: ParamGroup, grads: Vec<Array2<f64>>) {
        for (g, list) in &mut self.groups {
            if *g == group {
                *list = grads;
                return;
            }
        }
        panic!("gradient written for absent group {group:?}");
    }

    pub fn group(&self, group: ParamGroup) -> Option<&[Array2<f64>]> {
        self.groups.iter().find(|(g, _)| *g == group).map(|(_, list)| list.as_slice())
    }

    /// Reads one scalar gradient by the same flat indexing as
    /// [`ModelParams::flat_parameter`].
    pub fn flat_value(&self, index: usize) -> f64 {
        let mut remaining = index;
        for (_, list) in &self.groups {
            for tensor in list {
                if remaining < tensor.len() {
                    return *tensor.iter().nth(remaining).expect("index in range");
                }
                remaining -= tensor.len();
            }
        }
        panic!("flat gradient index {index} out of range");
    }
}

fn scale_list(mut list: Vec<Array2<f64>>, coeff: f64) -> Vec<Array2<f64>> {
    for tensor in &mut list {
        tensor.mapv_inplace(|v| v * coeff);
    }
    list
}

/// Output of one weighted backward pass over all active branches.
struct WeightedBackward {
    losses: ComponentLosses,
    decoder: Option<Vec<Array2<f64>>>,
    utility: Option<Vec<Array2<f64>>>,
    privacy: Option<Vec<Array2<f64>>>,
    encoder: Vec<Array2<f64>>,
}

/// Reconstruction branch: loss, decoder parameter gradients (unit
/// coefficient), and the gradient w.r.t. the feature sequence.
fn reconstruction_branch(
    params: &ModelParams,
    batch: &Batch,
    features: &FeatureTensor,
) -> Result<(f64, Vec<Array2<f64>>, Vec<Array2<f64>>), ModelError> {
    let decoder =
        params.decoder.as_ref().ok_or(ModelError::MissingComponent { component: "decoder" })?;
    let trace = params.decode_traced(features)?;
    let l_r = loss_reconstruction(&batch.inputs, &trace.reconstruction, &batch.mask)?;
    let width = batch.inputs.first().map_or(0, |m| m.ncols());
    let scale = 2.0 / (batch.mask.sum() * width as f64);
    let d_recon: Vec<Array2<f64>> = trace
        .reconstruction
        .iter()
        .zip(&batch.inputs)
        .enumerate()
        .map(|(t, (recon, target))| {
            let mut d = (recon - target) * scale;
            for (row, mut d_row) in d.rows_mut().into_iter().enumerate() {
                if batch.mask[[row, t]] == 0.0 {
                    d_row.fill(0.0);
                }
            }
            d
        })
        .collect();
    let (project_grads, d_lstm_out) = decoder.project.backward_seq(&trace.lstm.hidden, &d_recon);
    let (lstm_grads, d_features) = decoder.lstm.backward(&features.steps, &trace.lstm, &d_lstm_out);
    let grads = vec![
        lstm_grads.w_input,
        lstm_grads.w_hidden,
        lstm_grads.bias,
        project_grads.weight,
        project_grads.bias,
    ];
    Ok((l_r, grads, d_features))
}

/// Classification branch (utility or privacy): loss, head parameter
/// gradients (unit coefficient), and the gradient w.r.t. the features.
fn head_branch(
    params: &ModelParams,
    batch: &Batch,
    features: &FeatureTensor,
    utility: bool,
) -> Result<(f64, Vec<Array2<f64>>, Vec<Array2<f64>>), ModelError> {
    let head = if utility {
        params.utility.as_ref().ok_or(ModelError::MissingComponent { component: "utility head" })?
    } else {
        params.privacy.as_ref().ok_or(ModelError::MissingComponent { component: "privacy head" })?
    };
    let labels = if utility { &batch.next_labels } else { &batch.user_labels };
    let trace = params.head_traced(features, utility)?;
    let probabilities = &trace.probabilities;
    let loss = super::loss::loss_utility(labels, probabilities)?;

    // Softmax cross-entropy gradient on the logits; rows whose true-class
    // probability sits below the floor carry zero gradient because the
    // clamped loss is constant there.
    let batch_size = labels.len() as f64;
    let mut d_logits = Array2::zeros(probabilities.raw_dim());
    for (row, &label) in labels.iter().enumerate() {
        if probabilities[[row, label]] < PROBABILITY_FLOOR {
            continue;
        }
        for col in 0..probabilities.ncols() {
            let indicator = if col == label { 1.0 } else { 0.0 };
            d_logits[[row, col]] = (probabilities[[row, col]] - indicator) / batch_size;
        }
    }

    let last_hidden = trace.lstm.hidden.last().expect("head ran over a non-empty sequence");
    let (project_grads, d_last) = head.project.backward(last_hidden, &d_logits);
    let mut d_hidden: Vec<Array2<f64>> =
        trace.lstm.hidden.iter().map(|h| Array2::zeros(h.raw_dim())).collect();
    *d_hidden.last_mut().expect("non-empty") = d_last;
    let (lstm_grads, d_features) = head.lstm.backward(&features.steps, &trace.lstm, &d_hidden);
    let grads = vec![
        lstm_grads.w_input,
        lstm_grads.w_hidden,
        lstm_grads.bias,
        project_grads.weight,
        project_grads.bias,
    ];
    Ok((loss, grads, d_features))
}

/// Continues the chain from feature gradients down through the encoder.
fn encoder_continuation(
    params: &ModelParams,
    batch: &Batch,
    embedded: &[Array2<f64>],
    lstm_trace: &super::layers::LstmTrace,
    d_features: &[Array2<f64>],
) -> Vec<Array2<f64>> {
    let (lstm_grads, d_embedded) = params.encoder.lstm.backward(embedded, lstm_trace, d_features);
    let (embed_grads, _) = params.encoder.embed.backward_seq(&batch.inputs, &d_embedded);
    vec![
        embed_grads.weight,
        embed_grads.bias,
        lstm_grads.w_input,
        lstm_grads.w_hidden,
        lstm_grads.bias,
    ]
}

/// One full backward pass: every branch with a nonzero coefficient is
/// evaluated, their feature gradients combined, and the encoder chain run
/// on the combination. Branch order (reconstruction, utility, privacy) is
/// fixed so accumulation is deterministic.
fn weighted_backward(
    params: &ModelParams,
    batch: &Batch,
    coeffs: &ObjectiveCoeffs,
) -> Result<WeightedBackward, ModelError> {
    let enc = params.encode_traced(batch);
    let features = FeatureTensor { steps: enc.lstm.hidden.clone(), mask: batch.mask.clone() };
    let batch_size = batch.batch_size();
    let hidden = params.encoder.lstm.hidden_dim();
    let mut d_features: Vec<Array2<f64>> =
        vec![Array2::zeros((batch_size, hidden)); batch.steps()];
    let mut losses = ComponentLosses::default();
    let mut out_decoder = None;
    let mut out_utility = None;
    let mut out_privacy = None;

    if coeffs.reconstruction != 0.0 {
        let (l_r, grads, d_f) = reconstruction_branch(params, batch, &features)?;
        losses.l_r = l_r;
        for (total, part) in d_features.iter_mut().zip(&d_f) {
            *total += &(part * coeffs.reconstruction);
        }
        out_decoder = Some(scale_list(grads, coeffs.reconstruction));
    }
    if coeffs.utility != 0.0 {
        let (l_u, grads, d_f) = head_branch(params, batch, &features, true)?;
        losses.l_u = l_u;
        for (total, part) in d_features.iter_mut().zip(&d_f) {
            *total += &(part * coeffs.utility);
        }
        out_utility = Some(scale_list(grads, coeffs.utility));
    }
    if coeffs.privacy != 0.0 {
        let (l_p, grads, d_f) = head_branch(params, batch, &features, false)?;
        losses.l_p = l_p;
        for (total, part) in d_features.iter_mut().zip(&d_f) {
            *total += &(part * coeffs.privacy);
        }
        out_privacy = Some(scale_list(grads, coeffs.privacy));
    }

    let encoder = encoder_continuation(params, batch, &enc.embedded, &enc.lstm, &d_features);
    Ok(WeightedBackward {
        losses,
        decoder: out_decoder,
        utility: out_utility,
        privacy: out_privacy,
        encoder,
    })
}

/// Gradient of the decoder's own loss w.r.t. decoder parameters only (the
/// encoder is frozen). Returns the loss and the gradient list.
pub fn decoder_gradient(
    params: &ModelParams,
    batch: &Batch,
) -> Result<(f64, Vec<Array2<f64>>), ModelError> {
    let features = params.encode(batch)?;
    let (l_r, grads, _) = reconstruction_branch(params, batch, &features)?;
    Ok((l_r, grads))
}

/// Gradient of one head's own loss w.r.t. that head's parameters only.
pub fn head_gradient(
    params: &ModelParams,
    batch: &Batch,
    utility: bool,
) -> Result<(f64, Vec<Array2<f64>>), ModelError> {
    let features = params.encode(batch)?;
    let (loss, grads, _) = head_branch(params, batch, &features, utility)?;
    Ok((loss, grads))
}

/// Gradient of the encoder objective w.r.t. encoder parameters only.
/// Returns the component losses seen along the way (skipped ones 0.0).
pub fn encoder_objective_gradient(
    params: &ModelParams,
    batch: &Batch,
    coeffs: &ObjectiveCoeffs,
) -> Result<(ComponentLosses, Vec<Array2<f64>>), ModelError> {
    let pass = weighted_backward(params, batch, coeffs)?;
    Ok((pass.losses, pass.encoder))
}

/// Value of a loss under the current parameters; forward passes only.
pub fn loss_value(params: &ModelParams, batch: &Batch, kind: &LossKind) -> Result<f64, ModelError> {
    let features = params.encode(batch)?;
    let utility_loss = |f: &FeatureTensor| -> Result<f64, ModelError> {
        super::loss::loss_utility(&batch.next_labels, &params.predict_next(f)?)
    };
    let privacy_loss = |f: &FeatureTensor| -> Result<f64, ModelError> {
        super::loss::loss_privacy(&batch.user_labels, &params.reidentify(f)?)
    };
    match kind {
        LossKind::Reconstruction => {
            loss_reconstruction(&batch.inputs, &params.decode(&features)?, &batch.mask)
        }
        LossKind::Utility => utility_loss(&features),
        LossKind::Privacy => privacy_loss(&features),
        LossKind::Weighted(weights) => {
            weights.validate()?;
            let l_r = if weights.lambda1 != 0.0 {
                loss_reconstruction(&batch.inputs, &params.decode(&features)?, &batch.mask)?
            } else {
                0.0
            };
            let l_u = if weights.lambda2 != 0.0 { utility_loss(&features)? } else { 0.0 };
            let l_p = if weights.lambda3 != 0.0 { privacy_loss(&features)? } else { 0.0 };
            Ok(loss_sum(weights, l_r, l_u, l_p))
        }
    }
}

/// Complete analytic gradient of a loss w.r.t. every present parameter.
/// Groups a loss does not reach carry zero gradients.
pub fn full_gradient(
    params: &ModelParams,
    batch: &Batch,
    kind: &LossKind,
) -> Result<(f64, ModelGrads), ModelError> {
    let coeffs = match kind {
        LossKind::Reconstruction => {
            ObjectiveCoeffs { reconstruction: 1.0, utility: 0.0, privacy: 0.0 }
        }
        LossKind::Utility => ObjectiveCoeffs { reconstruction: 0.0, utility: 1.0, privacy: 0.0 },
        LossKind::Privacy => ObjectiveCoeffs { reconstruction: 0.0, utility: 0.0, privacy: 1.0 },
        LossKind::Weighted(weights) => {
            weights.validate()?;
            ObjectiveCoeffs::adversarial(weights)
        }
    };
    let pass = weighted_backward(params, batch, &coeffs)?;
    let mut grads = ModelGrads::zeros_like(params);
    grads.set_group(ParamGroup::Encoder, pass.encoder);
    if let Some(list) = pass.decoder {
        grads.set_group(ParamGroup::Decoder, list);
    }
    if let Some(list) = pass.utility {
        grads.set_group(ParamGroup::Utility, list);
    }
    if let Some(list) = pass.privacy {
        grads.set_group(ParamGroup::Privacy, list);
    }
    let value = match kind {
        LossKind::Reconstruction => pass.losses.l_r,
        LossKind::Utility => pass.losses.l_u,
        LossKind::Privacy => pass.losses.l_p,
        LossKind::Weighted(weights) => {
            loss_sum(weights, pass.losses.l_r, pass.losses.l_u, pass.losses.l_p)
        }
    };
    Ok((value, grads))
}

/// Central finite difference of a loss along one flat parameter index —
/// the independent reference the analytic gradients are checked against.
/// Uses only forward passes.
pub fn numeric_gradient(
    params: &ModelParams,
    batch: &Batch,
    kind: &LossKind,
    index: usize,
    step: f64,
) -> Result<f64, ModelError> {
    let mut probe = params.clone();
    let original = probe.flat_parameter(index);
    probe.set_flat_parameter(index, original + step);
    let plus = loss_value(&probe, batch, kind)?;
    probe.set_flat_parameter(index, original - step);
    let minus = loss_value(&probe, batch, kind)?;
    Ok((plus - minus) / (2.0 * step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnpae::model::build_model;
    use crate::nnpae::ops::make_batch;
    use crate::nnpae::testsupport::{tiny_dims, tiny_world};

    fn relative_error(analytic: f64, numeric: f64) -> f64 {
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        (analytic - numeric).abs() / denom
    }

    #[test]
    fn analytic_gradients_match_finite_differences_on_a_sample() {
        let (vocab, examples) = tiny_world();
        let model = build_model(ModelKind::Pae, &tiny_dims(&vocab), 7);
        let batch = make_batch(&examples, &[0, 2, 4, 6], &vocab).unwrap();
        let weights = LagrangeWeights::new(0.3, 0.5, 0.2).unwrap();
        let kinds = [
            LossKind::Reconstruction,
            LossKind::Utility,
            LossKind::Privacy,
            LossKind::Weighted(weights),
        ];
        let count = model.flat_parameter_count();
        for kind in &kinds {
            let (_, grads) = full_gradient(&model, &batch, kind).unwrap();
            // A spread of parameter positions across all groups.
            for index in (0..count).step_by(count / 7) {
                let numeric = numeric_gradient(&model, &batch, kind, index, 1e-5).unwrap();
                let analytic = grads.flat_value(index);
                assert!(
                    relative_error(analytic, numeric) < 1e-4,
                    "{kind:?} at {index}: analytic {analytic}, numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn zero_weight_branches_have_exactly_zero_gradients() {
        let (vocab, examples) = tiny_world();
        let model = build_model(ModelKind::Pae, &tiny_dims(&vocab), 3);
        let batch = make_batch(&examples, &[0, 1], &vocab).unwrap();
        let weights = LagrangeWeights::new(0.0, 1.0, 0.0).unwrap();
        let (_, grads) = full_gradient(&model, &batch, &LossKind::Weighted(weights)).unwrap();
        for group in [ParamGroup::Decoder, ParamGroup::Privacy] {
            let list = grads.group(group).unwrap();
            assert!(list.iter().all(|t| t.iter().all(|&v| v == 0.0)));
        }
        assert!(grads
            .group(ParamGroup::Utility)
            .unwrap()
            .iter()
            .any(|t| t.iter().any(|&v| v != 0.0)));
    }

    #[test]
    fn component_gradients_are_deterministic() {
        let (vocab, examples) = tiny_world();
        let model = build_model(ModelKind::Pae, &tiny_dims(&vocab), 5);
        let batch = make_batch(&examples, &[1, 3], &vocab).unwrap();
        let (l1, g1) = decoder_gradient(&model, &batch).unwrap();
        let (l2, g2) = decoder_gradient(&model, &batch).unwrap();
        assert_eq!(l1, l2);
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn head_gradient_only_describes_the_head() {
        let (vocab, examples) = tiny_world();
        let model = build_model(ModelKind::Pae, &tiny_dims(&vocab), 5);
        let batch = make_batch(&examples, &[0, 1, 2], &vocab).unwrap();
        let (_, grads) = head_gradient(&model, &batch, true).unwrap();
        let expected: Vec<_> = model.tensors(ParamGroup::Utility);
        assert_eq!(grads.len(), expected.len());
        for (grad, (_, tensor)) in grads.iter().zip(&expected) {
            assert_eq!(grad.raw_dim(), tensor.raw_dim());
        }
    }
}
