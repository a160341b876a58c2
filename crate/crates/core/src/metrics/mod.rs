//! Evaluation metrics: top-n accuracy, reconstruction distances, and the
//! privacy/utility comparison percentages, plus whole-dataset evaluation
//! and the serializable report.

mod accuracy;
mod compare;
mod distance;
mod evaluate;

pub use accuracy::{top_n_accuracy, TOP_N_VALUES};
pub use compare::{privacy_gain, tradeoff_score, utility_decline, PercentConvention};
pub use distance::{reconstruction_distance, Distances, DISTANCE_LOG_FLOOR};
pub use evaluate::{
    build_report, evaluate_model, report_csv_header, report_csv_row, ComparisonBlock,
    EvaluationReport, ModelEvaluation, ReportContext, REPORT_SCHEMA_VERSION,
};
