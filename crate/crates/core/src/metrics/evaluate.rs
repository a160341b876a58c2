//! Full-dataset model evaluation and the serializable report.
//!
//! Evaluation walks the example set in fixed-size chunks with no
//! randomness; per-example quantities are accumulated in example order, so
//! the numbers are bit-identical regardless of chunk size.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataio::SequenceExample;
use crate::error::ModelError;
use crate::metrics::accuracy::{label_rank, TOP_N_VALUES};
use crate::metrics::compare::{privacy_gain, tradeoff_score, utility_decline, PercentConvention};
use crate::metrics::distance::{DistanceAccumulator, Distances};
use crate::nnpae::{make_batch, ModelParams};
use crate::spatial::Vocab;

/// Version stamped into serialized reports.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Raw measurements of one model on one example set. Blocks are absent
/// when the model lacks the corresponding component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub examples: usize,
    /// n -> top-n next-location accuracy.
    pub top_n_utility: Option<BTreeMap<usize, f64>>,
    /// n -> top-n re-identification accuracy (the attacker's hit rate).
    pub top_n_privacy: Option<BTreeMap<usize, f64>>,
    pub reconstruction: Option<Distances>,
}

/// Runs every component the model has over the whole example set, in
/// deterministic chunks of `batch_size` examples.
pub fn evaluate_model(
    params: &ModelParams,
    examples: &[SequenceExample],
    vocab: &Vocab,
    batch_size: usize,
) -> Result<ModelEvaluation, ModelError> {
    if examples.is_empty() {
        return Err(ModelError::EmptyEvaluationSet);
    }
    let chunk_size = batch_size.max(1);
    let mut utility_hits: BTreeMap<usize, usize> = BTreeMap::new();
    let mut privacy_hits: BTreeMap<usize, usize> = BTreeMap::new();
    let mut distances = DistanceAccumulator::default();

    for start in (0..examples.len()).step_by(chunk_size) {
        let end = (start + chunk_size).min(examples.len());
        let indices: Vec<usize> = (start..end).collect();
        let batch = make_batch(examples, &indices, vocab)?;
        let features = params.encode(&batch)?;
        if params.kind.has_decoder() {
            let reconstruction = params.decode(&features)?;
            distances.observe(&batch.inputs, &reconstruction, &batch.mask)?;
        }
        if params.kind.has_utility() {
            let probabilities = params.predict_next(&features)?;
            count_hits(&probabilities, &batch.next_labels, &mut utility_hits)?;
        }
        if params.kind.has_privacy() {
            let probabilities = params.reidentify(&features)?;
            count_hits(&probabilities, &batch.user_labels, &mut privacy_hits)?;
        }
    }

    let total = examples.len() as f64;
    let to_accuracy = |hits: BTreeMap<usize, usize>| -> BTreeMap<usize, f64> {
        hits.into_iter().map(|(n, count)| (n, count as f64 / total)).collect()
    };
    Ok(ModelEvaluation {
        examples: examples.len(),
        top_n_utility: params.kind.has_utility().then(|| to_accuracy(utility_hits)),
        top_n_privacy: params.kind.has_privacy().then(|| to_accuracy(privacy_hits)),
        reconstruction: params.kind.has_decoder().then(|| distances.finish()),
    })
}

/// Tallies top-n hits for every reported n in one pass per row: a row hits
/// top-n exactly when its label's rank is below min(n, classes).
fn count_hits(
    probabilities: &ndarray::Array2<f64>,
    labels: &[usize],
    hits: &mut BTreeMap<usize, usize>,
) -> Result<(), ModelError> {
    let classes = probabilities.ncols();
    for (row, &label) in probabilities.rows().into_iter().zip(labels) {
        if label >= classes {
            return Err(ModelError::LabelOutOfRange { label, classes });
        }
        let rank = label_rank(row.as_slice().expect("row-major layout"), label)?;
        for n in TOP_N_VALUES {
            if rank < n.min(classes) {
                *hits.entry(n).or_insert(0) += 1;
            } else {
                hits.entry(n).or_insert(0);
            }
        }
    }
    Ok(())
}

/// Comparison of a protected model against standalone baselines, as signed
/// percentages per n under the stated convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonBlock {
    pub convention: PercentConvention,
    /// n -> change in next-location accuracy (negative = decline).
    pub utility_decline_pct: BTreeMap<usize, f64>,
    /// n -> change in re-identification inaccuracy (positive = gain).
    pub privacy_gain_pct: BTreeMap<usize, f64>,
    /// Top-1 privacy gain plus top-1 utility decline; present when both
    /// top-1 comparisons exist.
    pub tradeoff_pct: Option<f64>,
}

/// Everything measured about one model, ready to serialize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub top_n_utility: Option<BTreeMap<usize, f64>>,
    pub top_n_privacy: Option<BTreeMap<usize, f64>>,
    pub reconstruction: Option<Distances>,
    pub comparison: Option<ComparisonBlock>,
}

/// Assembles the report for a model, comparing against the standalone
/// predictor and the standalone re-identifier where those evaluations are
/// supplied (each comparison needs both sides to carry the block).
pub fn build_report(
    model: &ModelEvaluation,
    standalone_utility: Option<&ModelEvaluation>,
    standalone_privacy: Option<&ModelEvaluation>,
    convention: PercentConvention,
) -> EvaluationReport {
    let paired = |ours: &Option<BTreeMap<usize, f64>>,
                  baseline: Option<&ModelEvaluation>,
                  pick: fn(&ModelEvaluation) -> &Option<BTreeMap<usize, f64>>|
     -> BTreeMap<usize, (f64, f64)> {
        let Some(ours) = ours else { return BTreeMap::new() };
        let Some(theirs) = baseline.and_then(|b| pick(b).as_ref()) else {
            return BTreeMap::new();
        };
        ours.iter()
            .filter_map(|(&n, &model_value)| {
                theirs.get(&n).map(|&standalone_value| (n, (standalone_value, model_value)))
            })
            .collect()
    };

    let utility_decline_pct: BTreeMap<usize, f64> =
        paired(&model.top_n_utility, standalone_utility, |e| &e.top_n_utility)
            .into_iter()
            .map(|(n, (standalone, ours))| (n, utility_decline(standalone, ours, convention)))
            .collect();
    let privacy_gain_pct: BTreeMap<usize, f64> =
        paired(&model.top_n_privacy, standalone_privacy, |e| &e.top_n_privacy)
            .into_iter()
            .map(|(n, (standalone, ours))| (n, privacy_gain(standalone, ours, convention)))
            .collect();
    let tradeoff_pct = match (privacy_gain_pct.get(&1), utility_decline_pct.get(&1)) {
        (Some(&gain), Some(&decline)) => Some(tradeoff_score(gain, decline)),
        _ => None,
    };
    let comparison = (!utility_decline_pct.is_empty() || !privacy_gain_pct.is_empty()).then(
        || ComparisonBlock { convention, utility_decline_pct, privacy_gain_pct, tradeoff_pct },
    );

    EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        top_n_utility: model.top_n_utility.clone(),
        top_n_privacy: model.top_n_privacy.clone(),
        reconstruction: model.reconstruction,
        comparison,
    }
}

/// Identifies which run a flattened report row belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportContext {
    pub dataset: String,
    pub model: String,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub sequence_length: usize,
    pub granularity_minutes: u32,
    pub seed: u64,
}

/// Header for the flattened one-row-per-report CSV.
pub fn report_csv_header() -> String {
    let mut columns = vec![
        "dataset".to_string(),
        "model".to_string(),
        "lambda1".to_string(),
        "lambda2".to_string(),
        "lambda3".to_string(),
        "SL".to_string(),
        "granularity".to_string(),
        "seed".to_string(),
    ];
    for n in TOP_N_VALUES {
        columns.push(format!("utility_top{n}"));
    }
    for n in TOP_N_VALUES {
        columns.push(format!("reid_top{n}"));
    }
    columns.extend(
        ["euclidean", "manhattan", "euclidean_log10", "manhattan_log10"]
            .map(String::from),
    );
    for n in TOP_N_VALUES {
        columns.push(format!("utility_decline_top{n}"));
    }
    for n in TOP_N_VALUES {
        columns.push(format!("privacy_gain_top{n}"));
    }
    columns.push("tradeoff".to_string());
    columns.join(",")
}

/// One CSV row per report; absent blocks leave their cells empty.
pub fn report_csv_row(context: &ReportContext, report: &EvaluationReport) -> String {
    let mut cells = vec![
        context.dataset.clone(),
        context.model.clone(),
        context.lambda1.to_string(),
        context.lambda2.to_string(),
        context.lambda3.to_string(),
        context.sequence_length.to_string(),
        context.granularity_minutes.to_string(),
        context.seed.to_string(),
    ];
    let map_cells = |map: Option<&BTreeMap<usize, f64>>| -> Vec<String> {
        TOP_N_VALUES
            .iter()
            .map(|n| map.and_then(|m| m.get(n)).map(f64::to_string).unwrap_or_default())
            .collect()
    };
    cells.extend(map_cells(report.top_n_utility.as_ref()));
    cells.extend(map_cells(report.top_n_privacy.as_ref()));
    match &report.reconstruction {
        Some(d) => cells.extend([
            d.euclidean.to_string(),
            d.manhattan.to_string(),
            d.euclidean_log10.to_string(),
            d.manhattan_log10.to_string(),
        ]),
        None => cells.extend([String::new(), String::new(), String::new(), String::new()]),
    }
    let comparison = report.comparison.as_ref();
    cells.extend(map_cells(comparison.map(|c| &c.utility_decline_pct)));
    cells.extend(map_cells(comparison.map(|c| &c.privacy_gain_pct)));
    cells.push(
        comparison.and_then(|c| c.tradeoff_pct).map(|t| t.to_string()).unwrap_or_default(),
    );
    cells.join(",")
}
