//! The experiment configuration file: one JSON document that fully
//! describes a run. Command-line flags override individual fields; file
//! values override built-in defaults. Unknown keys are rejected everywhere
//! so a typo fails loudly instead of silently falling back to a default.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use privmob_core::dataio::{generate_synthetic, load_records, LocationRecord, SyntheticConfig};
use privmob_core::nnpae::ArchConfig;
use privmob_core::pareto::SweepConfig;
use privmob_core::pipeline::PrepConfig;
use privmob_core::training::TrainConfig;

use crate::errors::CliError;

/// A full experiment: where the data comes from, how it is prepared, the
/// model shape, the training schedule, where results go, and (optionally)
/// the sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub preprocessing: PrepConfig,
    #[serde(default)]
    pub model: ArchConfig,
    #[serde(default)]
    pub training: TrainConfig,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub sweep: SweepConfig,
}

/// Where records come from: a CSV on disk or a generated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// CSV with `user_id,timestamp,latitude,longitude` columns.
    Path(PathBuf),
    /// Settings for the synthetic generator.
    Synthetic(SyntheticConfig),
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read config `{}`: {e}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("config `{}`: {e}", path.display())))
}

impl ExperimentConfig {
    /// Applies command-line overrides. A `--seed` flag replaces the training
    /// seed and, when the dataset is synthetic, the generator seed too, so
    /// one flag reseeds the whole run.
    pub fn apply_overrides(&mut self, seed: Option<u64>, output: Option<&Path>) {
        if let Some(seed) = seed {
            self.training.seed = seed;
            if let DatasetSource::Synthetic(synth) = &mut self.dataset {
                synth.seed = seed;
            }
        }
        if let Some(dir) = output {
            self.output_dir = dir.to_path_buf();
        }
    }

    /// Checks every section; error messages name the offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        if let DatasetSource::Path(path) = &self.dataset {
            if !path.is_file() {
                return Err(CliError::Config(format!(
                    "dataset.path: `{}` does not exist or is not a file",
                    path.display()
                )));
            }
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(CliError::Config("output_dir: must not be empty".into()));
        }
        self.preprocessing.validate().map_err(CliError::from_pipeline)?;
        self.training.validate().map_err(CliError::from_train)?;
        self.sweep.validate().map_err(CliError::from_sweep)?;
        Ok(())
    }

    /// Loads or generates the records this experiment runs on.
    pub fn load_dataset(&self) -> Result<Vec<LocationRecord>, CliError> {
        match &self.dataset {
            DatasetSource::Path(path) => {
                let outcome = load_records(path).map_err(CliError::from_data)?;
                if outcome.rows_skipped > 0 {
                    eprintln!(
                        "note: skipped {} of {} unparseable rows in `{}`",
                        outcome.rows_skipped,
                        outcome.rows_total,
                        path.display()
                    );
                }
                Ok(outcome.records)
            }
            DatasetSource::Synthetic(synth) => {
                generate_synthetic(synth).map_err(CliError::from_data)
            }
        }
    }
}
