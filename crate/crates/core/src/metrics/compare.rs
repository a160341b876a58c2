//! Utility decline, privacy gain, and the composite trade-off score.
//!
//! All three compare a protected model against its standalone baseline.
//! Utility is next-location accuracy; privacy is the re-identification
//! *inaccuracy* rate (one minus the attacker's accuracy), so a positive
//! gain means the protected features leak less identity.

use serde::{Deserialize, Serialize};

/// How the comparison percentages are scaled. `AbsolutePoints` (default)
/// reports differences in percentage points, which keeps the trade-off
/// score exactly additive; `Relative` reports percent change against the
/// standalone value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PercentConvention {
    #[default]
    AbsolutePoints,
    Relative,
}

/// Change in task accuracy when switching from the standalone predictor
/// to the protected model: negative means the protection costs utility.
pub fn utility_decline(
    standalone_accuracy: f64,
    model_accuracy: f64,
    convention: PercentConvention,
) -> f64 {
    match convention {
        PercentConvention::AbsolutePoints => (model_accuracy - standalone_accuracy) * 100.0,
        PercentConvention::Relative => {
            (model_accuracy - standalone_accuracy) / standalone_accuracy * 100.0
        }
    }
}

/// Change in re-identification inaccuracy when switching from the
/// standalone attacker's accuracy to the attacker's accuracy against the
/// protected model: positive means more privacy.
pub fn privacy_gain(
    standalone_reid_accuracy: f64,
    model_reid_accuracy: f64,
    convention: PercentConvention,
) -> f64 {
    let standalone_inaccuracy = 1.0 - standalone_reid_accuracy;
    let model_inaccuracy = 1.0 - model_reid_accuracy;
    match convention {
        PercentConvention::AbsolutePoints => (model_inaccuracy - standalone_inaccuracy) * 100.0,
        PercentConvention::Relative => {
            (model_inaccuracy - standalone_inaccuracy) / standalone_inaccuracy * 100.0
        }
    }
}

/// The composite score: privacy gain plus utility decline, both signed.
/// A positive score means the privacy bought outweighs the utility paid.
pub fn tradeoff_score(privacy_gain_pct: f64, utility_decline_pct: f64) -> f64 {
    privacy_gain_pct + utility_decline_pct
}
