//! Model composition: encoder, mirrored decoder, and the two classifier
//! heads, plus the standalone single-task variants.
//!
//! The encoder embeds one-hot timesteps linearly and runs one recurrent
//! layer; its per-timestep hidden states are the feature sequence consumed
//! by every other component. The decoder is the encoder reversed layer by
//! layer (recurrent layer back down to the embedding width, then a linear
//! projection back to the input width), and each head is a small recurrent
//! layer over the features followed by a linear softmax classifier.

use serde::{Deserialize, Serialize};

use super::layers::{Linear, Lstm};
use crate::seeding::rng_for;

/// Layer widths shared by every component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDims {
    /// One-hot width of a timestep (location classes + pad + day + hour).
    pub input_width: usize,
    /// Linear embedding width inside the encoder.
    pub embedding: usize,
    /// Encoder recurrent width; also the feature width seen by the heads.
    pub hidden: usize,
    /// Recurrent width inside each classifier head.
    pub head_hidden: usize,
    /// Number of real location classes (next-location output width).
    pub num_locations: usize,
    /// Number of users (re-identification output width).
    pub num_users: usize,
    /// Timesteps per example.
    pub sequence_length: usize,
}

pub const DEFAULT_EMBEDDING: usize = 64;
pub const DEFAULT_HIDDEN: usize = 100;
pub const DEFAULT_HEAD_HIDDEN: usize = 64;

/// The user-tunable layer widths. The remaining dimensions (input width,
/// class counts, sequence length) are fixed by the vocabulary and the
/// windowing, so config files only carry these three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    pub embedding: usize,
    pub hidden: usize,
    pub head_hidden: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            embedding: DEFAULT_EMBEDDING,
            hidden: DEFAULT_HIDDEN,
            head_hidden: DEFAULT_HEAD_HIDDEN,
        }
    }
}

impl ModelDims {
    /// Completes the architecture widths with the data-dependent dimensions
    /// a vocabulary and a window length determine.
    pub fn for_vocab(
        vocab: &crate::spatial::Vocab,
        sequence_length: usize,
        arch: &ArchConfig,
    ) -> ModelDims {
        ModelDims {
            input_width: crate::spatial::feature_width(vocab.num_locations()),
            embedding: arch.embedding,
            hidden: arch.hidden,
            head_hidden: arch.head_hidden,
            num_locations: vocab.num_locations(),
            num_users: vocab.num_users(),
            sequence_length,
        }
    }
}

impl ModelDims {
    pub fn validate(&self) -> Result<(), crate::error::ModelError> {
        let fields = [
            ("input_width", self.input_width),
            ("embedding", self.embedding),
            ("hidden", self.hidden),
            ("head_hidden", self.head_hidden),
            ("num_locations", self.num_locations),
            ("num_users", self.num_users),
            ("sequence_length", self.sequence_length),
        ];
        for (name, value) in fields {
            if value == 0 {
                return Err(crate::error::ModelError::BadDims { field: name });
            }
        }
        Ok(())
    }
}

/// Which components a model carries: the full adversarial model or one of
/// the single-task baselines (each baseline keeps its own encoder copy).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Pae,
    StandaloneAutoencoder,
    StandalonePredictor,
    StandaloneReidentifier,
}

impl ModelKind {
    pub fn has_decoder(self) -> bool {
        matches!(self, ModelKind::Pae | ModelKind::StandaloneAutoencoder)
    }

    pub fn has_utility(self) -> bool {
        matches!(self, ModelKind::Pae | ModelKind::StandalonePredictor)
    }

    pub fn has_privacy(self) -> bool {
        matches!(self, ModelKind::Pae | ModelKind::StandaloneReidentifier)
    }

    /// The kebab-case name used in configs, checkpoints, and messages.
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Pae => "pae",
            ModelKind::StandaloneAutoencoder => "standalone-autoencoder",
            ModelKind::StandalonePredictor => "standalone-predictor",
            ModelKind::StandaloneReidentifier => "standalone-reidentifier",
        }
    }
}

/// Parameter groups, in the fixed order used for optimizer state, flat
/// parameter indexing, and checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    Encoder,
    Decoder,
    Utility,
    Privacy,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 4] =
        [ParamGroup::Encoder, ParamGroup::Decoder, ParamGroup::Utility, ParamGroup::Privacy];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::Encoder => "encoder",
            ParamGroup::Decoder => "decoder",
            ParamGroup::Utility => "utility",
            ParamGroup::Privacy => "privacy",
        }
    }
}

/// One-hot input -> linear embedding -> recurrent layer.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub embed: Linear,
    pub lstm: Lstm,
}

/// Features -> recurrent layer back to embedding width -> linear projection
/// back to input width: the encoder's layers reversed and transposed.
#[derive(Debug, Clone)]
pub struct Decoder {
    pub lstm: Lstm,
    pub project: Linear,
}

/// Features -> recurrent layer -> final hidden state -> linear classifier.
#[derive(Debug, Clone)]
pub struct Head {
    pub lstm: Lstm,
    pub project: Linear,
}

/// All trainable parameters of one model instance. Absent components mark
/// the standalone baselines.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub dims: ModelDims,
    pub encoder: Encoder,
    pub decoder: Option<Decoder>,
    pub utility: Option<Head>,
    pub privacy: Option<Head>,
}

/// Builds a freshly initialized model. Each component draws from its own
/// named sub-stream of the seed, so a standalone baseline and the full
/// model start from identical encoder (and matching head) weights under the
/// same seed — the property the degeneration tests rely on.
pub fn build_model(kind: ModelKind, dims: &ModelDims, seed: u64) -> ModelParams {
    let encoder = {
        let mut rng = rng_for(seed, "init/encoder");
        Encoder {
            embed: Linear::init(&mut rng, dims.input_width, dims.embedding),
            lstm: Lstm::init(&mut rng, dims.embedding, dims.hidden),
        }
    };
    let decoder = kind.has_decoder().then(|| {
        let mut rng = rng_for(seed, "init/decoder");
        Decoder {
            lstm: Lstm::init(&mut rng, dims.hidden, dims.embedding),
            project: Linear::init(&mut rng, dims.embedding, dims.input_width),
        }
    });
    let utility = kind.has_utility().then(|| {
        let mut rng = rng_for(seed, "init/utility");
        Head {
            lstm: Lstm::init(&mut rng, dims.hidden, dims.head_hidden),
            project: Linear::init(&mut rng, dims.head_hidden, dims.num_locations),
        }
    });
    let privacy = kind.has_privacy().then(|| {
        let mut rng = rng_for(seed, "init/privacy");
        Head {
            lstm: Lstm::init(&mut rng, dims.hidden, dims.head_hidden),
            project: Linear::init(&mut rng, dims.head_hidden, dims.num_users),
        }
    });
    ModelParams { kind, dims: dims.clone(), encoder, decoder, utility, privacy }
}

/// Convenience constructor for the single-task baselines.
pub fn build_standalone(kind: ModelKind, dims: &ModelDims, seed: u64) -> ModelParams {
    debug_assert_ne!(kind, ModelKind::Pae, "standalone constructor given the full model kind");
    build_model(kind, dims, seed)
}

impl ModelParams {
    /// Parameter groups present on this model, in canonical order.
    pub fn groups(&self) -> Vec<ParamGroup> {
        let mut groups = vec![ParamGroup::Encoder];
        if self.decoder.is_some() {
            groups.push(ParamGroup::Decoder);
        }
        if self.utility.is_some() {
            groups.push(ParamGroup::Utility);
        }
        if self.privacy.is_some() {
            groups.push(ParamGroup::Privacy);
        }
        groups
    }

    /// Named tensors of one group, in the fixed order optimizer moments and
    /// checkpoints are aligned to. Returns an empty list for absent groups.
    pub fn tensors(&self, group: ParamGroup) -> Vec<(String, &ndarray::Array2<f64>)> {
        let prefix = group.name();
        match group {
            ParamGroup::Encoder => {
                let e = &self.encoder;
                vec![
                    (format!("{prefix}.embed.weight"), &e.embed.weight),
                    (format!("{prefix}.embed.bias"), &e.embed.bias),
                    (format!("{prefix}.lstm.w_input"), &e.lstm.w_input),
                    (format!("{prefix}.lstm.w_hidden"), &e.lstm.w_hidden),
                    (format!("{prefix}.lstm.bias"), &e.lstm.bias),
                ]
            }
            ParamGroup::Decoder => match &self.decoder {
                Some(d) => vec![
                    (format!("{prefix}.lstm.w_input"), &d.lstm.w_input),
                    (format!("{prefix}.lstm.w_hidden"), &d.lstm.w_hidden),
                    (format!("{prefix}.lstm.bias"), &d.lstm.bias),
                    (format!("{prefix}.project.weight"), &d.project.weight),
                    (format!("{prefix}.project.bias"), &d.project.bias),
                ],
                None => vec![],
            },
            ParamGroup::Utility | ParamGroup::Privacy => {
                let head = if group == ParamGroup::Utility { &self.utility } else { &self.privacy };
                match head {
                    Some(h) => vec![
                        (format!("{prefix}.lstm.w_input"), &h.lstm.w_input),
                        (format!("{prefix}.lstm.w_hidden"), &h.lstm.w_hidden),
                        (format!("{prefix}.lstm.bias"), &h.lstm.bias),
                        (format!("{prefix}.project.weight"), &h.project.weight),
                        (format!("{prefix}.project.bias"), &h.project.bias),
                    ],
                    None => vec![],
                }
            }
        }
    }

    /// Mutable variant of [`ModelParams::tensors`], same order.
    pub fn tensors_mut(&mut self, group: ParamGroup) -> Vec<&mut ndarray::Array2<f64>> {
        match group {
            ParamGroup::Encoder => {
                let e = &mut self.encoder;
                vec![
                    &mut e.embed.weight,
                    &mut e.embed.bias,
                    &mut e.lstm.w_input,
                    &mut e.lstm.w_hidden,
                    &mut e.lstm.bias,
                ]
            }
            ParamGroup::Decoder => match &mut self.decoder {
                Some(d) => vec![
                    &mut d.lstm.w_input,
                    &mut d.lstm.w_hidden,
                    &mut d.lstm.bias,
                    &mut d.project.weight,
                    &mut d.project.bias,
                ],
                None => vec![],
            },
            ParamGroup::Utility | ParamGroup::Privacy => {
                let head = if group == ParamGroup::Utility {
                    &mut self.utility
                } else {
                    &mut self.privacy
                };
                match head {
                    Some(h) => vec![
                        &mut h.lstm.w_input,
                        &mut h.lstm.w_hidden,
                        &mut h.lstm.bias,
                        &mut h.project.weight,
                        &mut h.project.bias,
                    ],
                    None => vec![],
                }
            }
        }
    }

    /// Layer shapes of a component as `(rows, cols)` lists, weight matrices
    /// only, in forward order. Used to assert the decoder mirror property.
    pub fn layer_shapes(&self, group: ParamGroup) -> Vec<(usize, usize)> {
        match group {
            ParamGroup::Encoder => vec![
                (self.encoder.embed.input_dim(), self.encoder.embed.output_dim()),
                (self.encoder.lstm.input_dim(), self.encoder.lstm.hidden_dim()),
            ],
            ParamGroup::Decoder => match &self.decoder {
                Some(d) => vec![
                    (d.lstm.input_dim(), d.lstm.hidden_dim()),
                    (d.project.input_dim(), d.project.output_dim()),
                ],
                None => vec![],
            },
            ParamGroup::Utility | ParamGroup::Privacy => {
                let head = if group == ParamGroup::Utility { &self.utility } else { &self.privacy };
                match head {
                    Some(h) => vec![
                        (h.lstm.input_dim(), h.lstm.hidden_dim()),
                        (h.project.input_dim(), h.project.output_dim()),
                    ],
                    None => vec![],
                }
            }
        }
    }

    /// Total number of scalar parameters across present groups.
    pub fn flat_parameter_count(&self) -> usize {
        self.groups().iter().map(|&g| self.tensors(g).iter().map(|(_, t)| t.len()).sum::<usize>()).sum()
    }

    /// Reads one scalar parameter by its flat index (group order, then
    /// tensor order, then row-major within the tensor).
    pub fn flat_parameter(&self, index: usize) -> f64 {
        let mut remaining = index;
        for group in self.groups() {
            for (_, tensor) in self.tensors(group) {
                if remaining < tensor.len() {
                    return *tensor.iter().nth(remaining).expect("index in range");
                }
                remaining -= tensor.len();
            }
        }
        panic!("flat parameter index {index} out of range");
    }

    /// Writes one scalar parameter by its flat index.
    pub fn set_flat_parameter(&mut self, index: usize, value: f64) {
        let mut remaining = index;
        for group in self.groups() {
            for tensor in self.tensors_mut(group) {
                if remaining < tensor.len() {
                    *tensor.iter_mut().nth(remaining).expect("index in range") = value;
                    return;
                }
                remaining -= tensor.len();
            }
        }
        panic!("flat parameter index {index} out of range");
    }

    /// Hex digest over one group's tensors; cheap change detection for the
    /// parameter-isolation tests.
    pub fn group_digest(&self, group: ParamGroup) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for (name, tensor) in self.tensors(group) {
            hasher.update(name.as_bytes());
            for value in tensor.iter() {
                hasher.update(value.to_le_bytes());
            }
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dims() -> ModelDims {
        ModelDims {
            input_width: 36,
            embedding: 5,
            hidden: 8,
            head_hidden: 6,
            num_locations: 4,
            num_users: 3,
            sequence_length: 3,
        }
    }

    #[test]
    fn decoder_layer_shapes_mirror_the_encoder() {
        let model = build_model(ModelKind::Pae, &tiny_dims(), 11);
        let mut encoder_shapes = model.layer_shapes(ParamGroup::Encoder);
        encoder_shapes.reverse();
        let mirrored: Vec<(usize, usize)> =
            encoder_shapes.iter().map(|&(rows, cols)| (cols, rows)).collect();
        assert_eq!(mirrored, model.layer_shapes(ParamGroup::Decoder));
    }

    #[test]
    fn standalone_kinds_carry_exactly_their_own_head() {
        let dims = tiny_dims();
        let predictor = build_standalone(ModelKind::StandalonePredictor, &dims, 1);
        assert!(predictor.decoder.is_none() && predictor.privacy.is_none());
        assert!(predictor.utility.is_some());
        let reid = build_standalone(ModelKind::StandaloneReidentifier, &dims, 1);
        assert!(reid.decoder.is_none() && reid.utility.is_none());
        assert!(reid.privacy.is_some());
        let auto = build_standalone(ModelKind::StandaloneAutoencoder, &dims, 1);
        assert!(auto.utility.is_none() && auto.privacy.is_none());
        assert!(auto.decoder.is_some());
    }

    #[test]
    fn standalone_and_full_model_share_component_initialization() {
        let dims = tiny_dims();
        let full = build_model(ModelKind::Pae, &dims, 99);
        let predictor = build_standalone(ModelKind::StandalonePredictor, &dims, 99);
        assert_eq!(full.encoder.embed.weight, predictor.encoder.embed.weight);
        assert_eq!(full.encoder.lstm.w_input, predictor.encoder.lstm.w_input);
        assert_eq!(
            full.utility.as_ref().unwrap().project.weight,
            predictor.utility.as_ref().unwrap().project.weight
        );
    }

    #[test]
    fn softmax_output_widths_follow_the_class_counts() {
        let model = build_model(ModelKind::Pae, &tiny_dims(), 3);
        assert_eq!(model.utility.as_ref().unwrap().project.output_dim(), 4);
        assert_eq!(model.privacy.as_ref().unwrap().project.output_dim(), 3);
    }

    #[test]
    fn flat_parameter_roundtrip_covers_every_group() {
        let mut model = build_model(ModelKind::Pae, &tiny_dims(), 5);
        let count = model.flat_parameter_count();
        // Probe the first, an interior, and the last parameter.
        for index in [0, count / 2, count - 1] {
            let original = model.flat_parameter(index);
            model.set_flat_parameter(index, original + 1.5);
            assert_eq!(model.flat_parameter(index), original + 1.5);
            model.set_flat_parameter(index, original);
        }
        let per_group: usize = ParamGroup::ALL
            .iter()
            .map(|&g| model.tensors(g).iter().map(|(_, t)| t.len()).sum::<usize>())
            .sum();
        assert_eq!(count, per_group);
    }

    #[test]
    fn group_digest_detects_single_parameter_changes() {
        let mut model = build_model(ModelKind::Pae, &tiny_dims(), 5);
        let before = model.group_digest(ParamGroup::Privacy);
        let encoder_before = model.group_digest(ParamGroup::Encoder);
        let head = model.privacy.as_mut().unwrap();
        head.project.bias[[0, 0]] += 1e-9;
        assert_ne!(model.group_digest(ParamGroup::Privacy), before);
        assert_eq!(model.group_digest(ParamGroup::Encoder), encoder_before);
    }

    #[test]
    fn zero_dims_are_rejected() {
        let mut dims = tiny_dims();
        dims.hidden = 0;
        assert!(matches!(
            dims.validate(),
            Err(crate::error::ModelError::BadDims { field: "hidden" })
        ));
    }
}
