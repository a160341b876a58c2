//! `privmob evaluate`: score a trained model on held-out records and write
//! `report.json` + `report.csv`.
//!
//! Passing the standalone baseline checkpoints adds the comparison block
//! (utility decline, privacy gain, and the trade-off score, all in
//! percentage points). Without them the report still carries the raw
//! accuracies; the comparison is simply omitted, with a note on stderr.
//! All checkpoints must hash to the same vocabulary — mixing runs from
//! different preprocessing is an artifact error, exit code 4.

use std::path::{Path, PathBuf};

use clap::Args;

use privmob_core::dataio::load_records;
use privmob_core::fsutil::write_atomic;
use privmob_core::metrics::{
    build_report, evaluate_model, report_csv_header, report_csv_row, ModelEvaluation,
    PercentConvention, ReportContext,
};
use privmob_core::nnpae::{ModelKind, ModelParams};
use privmob_core::pipeline::prepare_examples;
use privmob_core::spatial::Vocab;

use crate::artifacts::{load_companion, load_trained, TrainedArtifact};
use crate::commands::kind_name;
use crate::errors::CliError;

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Checkpoint to score; `vocab.json` and `manifest.json` must sit beside it.
    #[arg(long)]
    pub checkpoint: PathBuf,

    /// Held-out records CSV to evaluate on.
    #[arg(long)]
    pub input: PathBuf,

    /// Standalone next-location baseline (enables the utility-decline columns).
    #[arg(long)]
    pub standalone_predictor: Option<PathBuf>,

    /// Standalone re-identification baseline (enables the privacy-gain columns).
    #[arg(long)]
    pub standalone_reidentifier: Option<PathBuf>,

    /// Directory for `report.json` and `report.csv`.
    #[arg(long, default_value = ".")]
    pub output: PathBuf,
}

pub fn run(args: EvaluateArgs) -> Result<(), CliError> {
    let artifact = load_trained(&args.checkpoint)?;
    let params = artifact.params()?;

    let input = load_records(&args.input).map_err(CliError::from_data)?;
    if input.rows_skipped > 0 {
        eprintln!(
            "note: skipped {} of {} unparseable rows in `{}`",
            input.rows_skipped,
            input.rows_total,
            args.input.display()
        );
    }
    let prep = &artifact.manifest.config.preprocessing;
    let outcome =
        prepare_examples(&input.records, prep, &artifact.vocab).map_err(CliError::from_pipeline)?;
    let examples = outcome.examples;
    let batch_size = artifact.checkpoint.manifest.train_config.batch_size.max(1);

    let model_eval = evaluate_model(&params, &examples, &artifact.vocab, batch_size)
        .map_err(CliError::from_model)?;
    let utility_baseline = maybe_baseline(
        args.standalone_predictor.as_deref(),
        ModelKind::StandalonePredictor,
        "--standalone-predictor",
        "utility decline",
        &artifact,
        &examples,
        batch_size,
    )?;
    let privacy_baseline = maybe_baseline(
        args.standalone_reidentifier.as_deref(),
        ModelKind::StandaloneReidentifier,
        "--standalone-reidentifier",
        "privacy gain",
        &artifact,
        &examples,
        batch_size,
    )?;

    let report = build_report(
        &model_eval,
        utility_baseline.as_ref(),
        privacy_baseline.as_ref(),
        PercentConvention::default(),
    );
    let weights = artifact.checkpoint.manifest.train_config.weights;
    let context = ReportContext {
        dataset: args.input.display().to_string(),
        model: kind_name(artifact.checkpoint.manifest.model_kind).to_string(),
        lambda1: weights.lambda1,
        lambda2: weights.lambda2,
        lambda3: weights.lambda3,
        sequence_length: prep.sequence_length,
        granularity_minutes: prep.resolution_minutes,
        seed: artifact.checkpoint.manifest.train_config.seed,
    };

    let json = serde_json::json!({ "context": context, "report": report });
    let json_bytes = serde_json::to_vec_pretty(&json)
        .map_err(|e| CliError::Io(format!("rendering report.json: {e}")))?;
    write_atomic(&args.output.join("report.json"), &json_bytes)
        .map_err(|e| CliError::io("writing report.json", e))?;

    let csv_text = format!("{}\n{}\n", report_csv_header(), report_csv_row(&context, &report));
    write_atomic(&args.output.join("report.csv"), csv_text.as_bytes())
        .map_err(|e| CliError::io("writing report.csv", e))?;

    print_summary(&report.top_n_utility, &report.top_n_privacy, &report.comparison);
    println!(
        "evaluated {} examples; report in `{}`",
        model_eval.examples,
        args.output.display()
    );
    Ok(())
}

/// Loads and evaluates one optional baseline checkpoint; a `None` path just
/// notes what the report will be missing.
#[allow(clippy::too_many_arguments)]
fn maybe_baseline(
    path: Option<&Path>,
    expected_kind: ModelKind,
    flag: &str,
    enables: &str,
    artifact: &TrainedArtifact,
    examples: &[privmob_core::dataio::SequenceExample],
    batch_size: usize,
) -> Result<Option<ModelEvaluation>, CliError> {
    let Some(path) = path else {
        eprintln!("note: no {flag} given; {enables} will be omitted from the report");
        return Ok(None);
    };
    let params: ModelParams = load_companion(path, expected_kind, flag, &artifact.vocab)?;
    evaluate_one(&params, examples, &artifact.vocab, batch_size).map(Some)
}

fn evaluate_one(
    params: &ModelParams,
    examples: &[privmob_core::dataio::SequenceExample],
    vocab: &Vocab,
    batch_size: usize,
) -> Result<ModelEvaluation, CliError> {
    evaluate_model(params, examples, vocab, batch_size).map_err(CliError::from_model)
}

fn print_summary(
    utility: &Option<std::collections::BTreeMap<usize, f64>>,
    privacy: &Option<std::collections::BTreeMap<usize, f64>>,
    comparison: &Option<privmob_core::metrics::ComparisonBlock>,
) {
    if let Some(top) = utility.as_ref().and_then(|m| m.get(&1)) {
        println!("top-1 next-location accuracy: {top:.4}");
    }
    if let Some(top) = privacy.as_ref().and_then(|m| m.get(&1)) {
        println!("top-1 re-identification accuracy: {top:.4}");
    }
    if let Some(block) = comparison {
        if let Some(score) = block.tradeoff_pct {
            println!("privacy/utility trade-off score: {score:+.2} points");
        }
    }
}
