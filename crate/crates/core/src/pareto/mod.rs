//! Trade-off exploration: sweeping configurations and extracting the
//! utility/privacy frontier from the resulting point cloud.
//!
//! Utility is top-1 next-location accuracy and privacy is top-1
//! re-identification inaccuracy, both on the test split, so every point
//! lives in the unit square with "up and to the right" unambiguously better.

mod front;
mod sweep;

pub use front::{classify_external, dominates, pareto_front, ExternalVerdict};
pub use sweep::{
    run_sweep, write_sweep_csv, ParetoPoint, SweepConfig, SweepFailure, SweepOutcome,
};
