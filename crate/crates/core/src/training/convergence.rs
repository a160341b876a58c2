//! Early-stopping rule over the validation objective.
//!
//! An epoch counts as an improvement only when the validation objective
//! drops below the best seen so far by at least `min_delta`. Training is
//! converged once `patience` consecutive epochs fail that bar.

use serde::{Deserialize, Serialize};

/// Early-stopping settings. Absent from the training config means
/// training always runs the full epoch budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// Consecutive non-improving epochs tolerated before stopping.
    pub patience: usize,
    /// Minimum drop below the best value that still counts as progress.
    pub min_delta: f64,
}

/// Running best-value / stall-count state, fed one epoch at a time.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceTracker {
    pub best: f64,
    pub stall: usize,
}

impl Default for ConvergenceTracker {
    fn default() -> Self {
        ConvergenceTracker { best: f64::INFINITY, stall: 0 }
    }
}

impl ConvergenceTracker {
    /// Record one epoch's validation objective; returns `true` when the
    /// stall streak has reached `patience`.
    pub fn observe(&mut self, value: f64, config: &ConvergenceConfig) -> bool {
        if value < self.best && self.best - value >= config.min_delta {
            self.best = value;
            self.stall = 0;
        } else {
            self.stall += 1;
        }
        self.stall >= config.patience
    }
}

/// Whether a validation-objective history has already converged: `true`
/// when the last `patience` (or more) epochs brought no improvement of at
/// least `min_delta` over the running best.
pub fn check_convergence(history: &[f64], patience: usize, min_delta: f64) -> bool {
    if patience == 0 {
        return !history.is_empty();
    }
    let config = ConvergenceConfig { patience, min_delta };
    let mut tracker = ConvergenceTracker::default();
    let mut converged = false;
    for &value in history {
        converged = tracker.observe(value, &config);
    }
    converged
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_history_longer_than_patience_converges() {
        assert!(check_convergence(&[1.0, 1.0, 1.0, 1.0], 3, 1e-4));
    }

    #[test]
    fn strictly_decreasing_history_does_not_converge() {
        assert!(!check_convergence(&[4.0, 3.0, 2.0, 1.0], 3, 1e-4));
    }

    #[test]
    fn improvement_of_exactly_min_delta_resets_the_stall() {
        // Each epoch improves by exactly min_delta, which meets the bar,
        // so the streak never reaches the patience threshold.
        let history = [1.0, 1.0 - 1e-4, 1.0 - 2e-4, 1.0 - 3e-4];
        assert!(!check_convergence(&history, 3, 1e-4));
    }

    #[test]
    fn improvement_below_min_delta_counts_as_a_stall() {
        let history = [1.0, 1.0 - 1e-7, 1.0 - 2e-7, 1.0 - 3e-7];
        assert!(check_convergence(&history, 3, 1e-4));
    }

    #[test]
    fn stall_must_be_consecutive_to_trigger() {
        // Two stalls, a real improvement, then two more stalls: never
        // three in a row.
        let history = [1.0, 1.0, 1.0, 0.5, 0.5, 0.5];
        assert!(!check_convergence(&history, 3, 1e-4));
        assert!(check_convergence(&[1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.5], 3, 1e-4));
    }

    #[test]
    fn tracker_starts_from_infinity_so_the_first_epoch_improves() {
        let config = ConvergenceConfig { patience: 2, min_delta: 1e-4 };
        let mut tracker = ConvergenceTracker::default();
        assert!(!tracker.observe(123.0, &config));
        assert_eq!(tracker.best, 123.0);
        assert_eq!(tracker.stall, 0);
    }

    #[test]
    fn worsening_values_never_update_the_best() {
        let config = ConvergenceConfig { patience: 10, min_delta: 1e-4 };
        let mut tracker = ConvergenceTracker::default();
        tracker.observe(1.0, &config);
        tracker.observe(2.0, &config);
        tracker.observe(3.0, &config);
        assert_eq!(tracker.best, 1.0);
        assert_eq!(tracker.stall, 2);
    }
}
