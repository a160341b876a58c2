//! `privmob predict`: run a trained model over a records CSV and write one
//! of its three outputs — next-location probabilities, re-identification
//! probabilities, or reconstructed input features.
//!
//! Probability heads emit the top classes (at most ten) in descending
//! probability, with the true label alongside for quick inspection. Every
//! probability row is checked to sum to 1 before truncation; a violation is
//! a numerical failure, not something to paper over.

use std::path::PathBuf;

use clap::{Args, ValueEnum};

use privmob_core::dataio::{load_records, SequenceExample};
use privmob_core::fsutil::write_atomic;
use privmob_core::nnpae::{make_batch, ModelParams};
use privmob_core::pipeline::prepare_examples;
use privmob_core::spatial::Vocab;

use crate::artifacts::load_trained;
use crate::errors::CliError;

const MAX_CLASSES_PER_ROW: usize = 10;
const PROBABILITY_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Trained checkpoint; `vocab.json` and `manifest.json` must sit beside it.
    #[arg(long)]
    pub checkpoint: PathBuf,

    /// Records CSV to run the model over.
    #[arg(long)]
    pub input: PathBuf,

    /// Which model output to write.
    #[arg(long, value_enum, default_value_t = HeadArg::NextLocation)]
    pub head: HeadArg,

    /// Output CSV path.
    #[arg(long, default_value = "predictions.csv")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeadArg {
    /// Probabilities over next-location classes.
    NextLocation,
    /// Probabilities over user identities.
    UserId,
    /// Reconstructed input features, one row per real timestep.
    Reconstruction,
}

pub fn run(args: PredictArgs) -> Result<(), CliError> {
    let artifact = load_trained(&args.checkpoint)?;
    let params = artifact.params()?;
    let prep = &artifact.manifest.config.preprocessing;

    let input = load_records(&args.input).map_err(CliError::from_data)?;
    if input.rows_skipped > 0 {
        eprintln!(
            "note: skipped {} of {} unparseable rows in `{}`",
            input.rows_skipped,
            input.rows_total,
            args.input.display()
        );
    }
    let outcome =
        prepare_examples(&input.records, prep, &artifact.vocab).map_err(CliError::from_pipeline)?;
    let dropped = outcome.windows_total - outcome.examples.len();
    if dropped > 0 {
        eprintln!(
            "note: dropped {dropped} of {} windows (unseen cells, out-of-area points, or unknown users)",
            outcome.windows_total
        );
    }

    let batch_size = artifact.checkpoint.manifest.train_config.batch_size.max(1);
    let bytes = match args.head {
        HeadArg::NextLocation => probability_csv(
            &params,
            &outcome.examples,
            &artifact.vocab,
            batch_size,
            Target::NextLocation,
        )?,
        HeadArg::UserId => probability_csv(
            &params,
            &outcome.examples,
            &artifact.vocab,
            batch_size,
            Target::UserId,
        )?,
        HeadArg::Reconstruction => {
            reconstruction_csv(&params, &outcome.examples, &artifact.vocab, batch_size)?
        }
    };

    write_atomic(&args.output, &bytes).map_err(|e| CliError::io("writing predictions", e))?;
    println!(
        "wrote predictions for {} examples to `{}`",
        outcome.examples.len(),
        args.output.display()
    );
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Target {
    NextLocation,
    UserId,
}

/// Runs one head over the examples in deterministic fixed-size chunks and
/// renders `example,user,actual,class_i,prob_i...` rows, classes descending
/// by probability (ties broken by class index).
fn probability_csv(
    params: &ModelParams,
    examples: &[SequenceExample],
    vocab: &Vocab,
    batch_size: usize,
    target: Target,
) -> Result<Vec<u8>, CliError> {
    let classes = match target {
        Target::NextLocation => vocab.num_locations(),
        Target::UserId => vocab.num_users(),
    };
    let top = classes.min(MAX_CLASSES_PER_ROW);

    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["example".to_string(), "user".to_string(), "actual".to_string()];
    for i in 1..=top {
        header.push(format!("class_{i}"));
        header.push(format!("prob_{i}"));
    }
    writer.write_record(&header).map_err(csv_render_error)?;

    let indices: Vec<usize> = (0..examples.len()).collect();
    for chunk in indices.chunks(batch_size) {
        let batch = make_batch(examples, chunk, vocab).map_err(CliError::from_model)?;
        let features = params.encode(&batch).map_err(CliError::from_model)?;
        let probs = match target {
            Target::NextLocation => params.predict_next(&features),
            Target::UserId => params.reidentify(&features),
        }
        .map_err(CliError::from_model)?;

        for (row_in_chunk, &example_index) in chunk.iter().enumerate() {
            let row = probs.row(row_in_chunk);
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
                return Err(CliError::Numerical(format!(
                    "probability row for example {example_index} sums to {sum}, expected 1"
                )));
            }
            let mut order: Vec<usize> = (0..classes).collect();
            order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));

            let example = &examples[example_index];
            let mut record = vec![
                example_index.to_string(),
                class_label(vocab, Target::UserId, example.user_label),
                class_label(
                    vocab,
                    target,
                    match target {
                        Target::NextLocation => example.next_location,
                        Target::UserId => example.user_label,
                    },
                ),
            ];
            for &class in order.iter().take(top) {
                record.push(class_label(vocab, target, class));
                record.push(row[class].to_string());
            }
            writer.write_record(&record).map_err(csv_render_error)?;
        }
    }
    finish(writer)
}

/// Renders decoder outputs: one row per real (unpadded) timestep, columns
/// matching the model's input feature layout.
fn reconstruction_csv(
    params: &ModelParams,
    examples: &[SequenceExample],
    vocab: &Vocab,
    batch_size: usize,
) -> Result<Vec<u8>, CliError> {
    let width = params.dims.input_width;
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["example".to_string(), "timestep".to_string()];
    for i in 0..width {
        header.push(format!("f{i}"));
    }
    writer.write_record(&header).map_err(csv_render_error)?;

    let indices: Vec<usize> = (0..examples.len()).collect();
    for chunk in indices.chunks(batch_size) {
        let batch = make_batch(examples, chunk, vocab).map_err(CliError::from_model)?;
        let features = params.encode(&batch).map_err(CliError::from_model)?;
        let reconstruction = params.decode(&features).map_err(CliError::from_model)?;

        for (row_in_chunk, &example_index) in chunk.iter().enumerate() {
            for (t, step) in reconstruction.iter().enumerate() {
                if batch.mask[[row_in_chunk, t]] == 0.0 {
                    continue;
                }
                let mut record = vec![example_index.to_string(), t.to_string()];
                for value in step.row(row_in_chunk) {
                    record.push(value.to_string());
                }
                writer.write_record(&record).map_err(csv_render_error)?;
            }
        }
    }
    finish(writer)
}

fn class_label(vocab: &Vocab, target: Target, index: usize) -> String {
    let label = match target {
        Target::NextLocation => vocab.location_class(index),
        Target::UserId => vocab.user_class(index),
    };
    label.map_or_else(|| format!("#{index}"), str::to_string)
}

fn csv_render_error(error: csv::Error) -> CliError {
    CliError::Io(format!("rendering predictions: {error}"))
}

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    writer
        .into_inner()
        .map_err(|e| CliError::Io(format!("rendering predictions: {}", e.into_error())))
}
