//! `privmob train`: prepare data, train a model, write artifacts.
//!
//! The output directory receives four files — `checkpoint.json`,
//! `vocab.json`, `history.csv`, and `manifest.json` — each written via a
//! temporary file renamed into place. Rerunning with the same config and
//! seed reproduces all four byte-for-byte except the manifest's timestamp
//! field.

use std::path::PathBuf;

use clap::{Args, ValueEnum};

use privmob_core::fsutil::write_atomic;
use privmob_core::nnpae::{build_model, ModelDims, ModelKind};
use privmob_core::pipeline::prepare;
use privmob_core::training::{write_history_csv, Trainer};

use crate::commands::kind_name;
use crate::config::load_config;
use crate::errors::CliError;
use crate::manifest::{RunManifest, MANIFEST_SCHEMA_VERSION};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,

    /// Which model to train.
    #[arg(long, value_enum, default_value_t = ModelKindArg::Pae)]
    pub model_kind: ModelKindArg,

    /// Overrides `training.seed` (and the synthetic generator seed).
    #[arg(long)]
    pub seed: Option<u64>,

    /// Overrides `output_dir` from the config.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Command-line spelling of the trainable model kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKindArg {
    /// The adversarial autoencoder with both task heads.
    Pae,
    /// Encoder + next-location head only.
    StandalonePredictor,
    /// Encoder + re-identification head only.
    StandaloneReidentifier,
    /// Encoder + decoder only.
    StandaloneAutoencoder,
}

impl ModelKindArg {
    pub fn into_kind(self) -> ModelKind {
        match self {
            ModelKindArg::Pae => ModelKind::Pae,
            ModelKindArg::StandalonePredictor => ModelKind::StandalonePredictor,
            ModelKindArg::StandaloneReidentifier => ModelKind::StandaloneReidentifier,
            ModelKindArg::StandaloneAutoencoder => ModelKind::StandaloneAutoencoder,
        }
    }
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let mut config = load_config(&args.config)?;
    config.apply_overrides(args.seed, args.output.as_deref());
    config.validate()?;
    let kind = args.model_kind.into_kind();

    let records = config.load_dataset()?;
    let prepared = prepare(&records, &config.preprocessing, config.training.seed)
        .map_err(CliError::from_pipeline)?;
    eprintln!(
        "prepared {} train / {} validation / {} test sequences ({} location classes, {} users)",
        prepared.train.len(),
        prepared.validation.len(),
        prepared.test.len(),
        prepared.vocab.num_locations(),
        prepared.vocab.num_users()
    );

    let dims =
        ModelDims::for_vocab(&prepared.vocab, config.preprocessing.sequence_length, &config.model);
    let params = build_model(kind, &dims, config.training.seed);
    let mut trainer = Trainer::new(params, config.training.clone(), &prepared.vocab)
        .map_err(CliError::from_train)?;
    trainer
        .run(&prepared.train, &prepared.validation, &prepared.vocab)
        .map_err(CliError::from_train)?;

    let out = &config.output_dir;
    trainer
        .checkpoint()
        .save(&out.join("checkpoint.json"))
        .map_err(|e| CliError::Io(e.to_string()))?;

    let mut history = Vec::new();
    write_history_csv(trainer.history(), &mut history)
        .map_err(|e| CliError::io("rendering history.csv", e))?;
    write_atomic(&out.join("history.csv"), &history)
        .map_err(|e| CliError::io("writing history.csv", e))?;

    write_atomic(&out.join("vocab.json"), prepared.vocab.to_json().as_bytes())
        .map_err(|e| CliError::io("writing vocab.json", e))?;

    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        command: "train".into(),
        package_version: env!("CARGO_PKG_VERSION").into(),
        seed: config.training.seed,
        model_kind: Some(kind_name(kind).into()),
        vocab_sha256: Some(prepared.vocab.sha256()),
        prep_stats: Some(prepared.stats),
        epochs_completed: Some(trainer.epochs_completed()),
        converged: Some(trainer.converged()),
        config: config.clone(),
        timestamp: RunManifest::now_timestamp(),
    };
    let manifest_bytes = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| CliError::Io(format!("rendering manifest.json: {e}")))?;
    write_atomic(&out.join("manifest.json"), &manifest_bytes)
        .map_err(|e| CliError::io("writing manifest.json", e))?;

    println!(
        "trained {} for {} epochs{}; artifacts in `{}`",
        kind_name(kind),
        trainer.epochs_completed(),
        if trainer.converged() { " (converged)" } else { "" },
        out.display()
    );
    Ok(())
}
