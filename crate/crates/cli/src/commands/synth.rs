//! `privmob synth`: generate a synthetic mobility dataset and write it as a
//! records CSV that `train` (and `load_records`) can consume directly.

use std::path::PathBuf;

use clap::Args;

use privmob_core::dataio::write_records;
use privmob_core::error::DataError;

use crate::config::{load_config, DatasetSource};
use crate::errors::CliError;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Experiment configuration (JSON) with a `dataset.synthetic` section.
    #[arg(long)]
    pub config: PathBuf,

    /// Overrides the generator seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output CSV path (default `<output_dir>/records.csv`).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(args: SynthArgs) -> Result<(), CliError> {
    let mut config = load_config(&args.config)?;
    config.apply_overrides(args.seed, None);
    let synth = match &config.dataset {
        DatasetSource::Synthetic(synth) => synth.clone(),
        DatasetSource::Path(_) => {
            return Err(CliError::Config(
                "dataset.synthetic: the synth command needs a synthetic dataset section, \
                 but the config points at a file"
                    .into(),
            ))
        }
    };

    let records = config.load_dataset()?;
    let path = args.output.unwrap_or_else(|| config.output_dir.join("records.csv"));
    write_records(&records, &path).map_err(|e| match e {
        DataError::Io { .. } => CliError::Io(e.to_string()),
        other => CliError::Config(other.to_string()),
    })?;
    println!(
        "wrote {} synthetic records for {} users to `{}`",
        records.len(),
        synth.num_users,
        path.display()
    );
    Ok(())
}
