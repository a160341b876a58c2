//! The three component losses and their weighted combination.
//!
//! Reconstruction is mean squared error over unmasked matrix elements; the
//! two classification losses are mean categorical cross-entropy with a
//! probability floor so a confidently wrong prediction stays finite. The
//! combined objective trades them off as
//! `L_sum = -lambda1 * L_R + lambda2 * L_U - lambda3 * L_P`: the encoder is
//! trained to make reconstruction and re-identification hard while keeping
//! next-location prediction easy.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Smallest probability fed to the logarithm; keeps cross-entropy finite.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Non-negative trade-off weights for the combined objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangeWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl LagrangeWeights {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<LagrangeWeights, ModelError> {
        let weights = LagrangeWeights { lambda1, lambda2, lambda3 };
        weights.validate()?;
        Ok(weights)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0 && self.lambda3 >= 0.0) {
            return Err(ModelError::NegativeWeight(self.lambda1, self.lambda2, self.lambda3));
        }
        if self.lambda1 == 0.0 && self.lambda2 == 0.0 && self.lambda3 == 0.0 {
            return Err(ModelError::AllZeroWeights);
        }
        Ok(())
    }
}

/// The three component losses plus their weighted combination for one
/// evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_r: f64,
    pub l_u: f64,
    pub l_p: f64,
    pub l_sum: f64,
}

/// Mean squared error between reconstruction and target over unmasked
/// elements: the element count is (unmasked timesteps) x (input width).
pub fn loss_reconstruction(
    targets: &[Array2<f64>],
    reconstruction: &[Array2<f64>],
    mask: &Array2<f64>,
) -> Result<f64, ModelError> {
    if targets.len() != reconstruction.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "target has {} timesteps, reconstruction has {}",
            targets.len(),
            reconstruction.len()
        )));
    }
    let unmasked_steps = mask.sum();
    if unmasked_steps == 0.0 {
        return Err(ModelError::EmptyMask);
    }
    let width = targets.first().map_or(0, |m| m.ncols());
    let mut total = 0.0;
    for (t, (target, recon)) in targets.iter().zip(reconstruction).enumerate() {
        if target.raw_dim() != recon.raw_dim() {
            return Err(ModelError::ShapeMismatch(format!(
                "timestep {t}: target {:?} vs reconstruction {:?}",
                target.shape(),
                recon.shape()
            )));
        }
        for (row, (tr, rr)) in target.rows().into_iter().zip(recon.rows()).enumerate() {
            if mask[[row, t]] == 0.0 {
                continue;
            }
            for (a, b) in tr.iter().zip(rr.iter()) {
                let diff = b - a;
                total += diff * diff;
            }
        }
    }
    Ok(total / (unmasked_steps * width as f64))
}

/// Mean categorical cross-entropy of `probabilities` rows against integer
/// labels, with the probability floor applied inside the logarithm.
fn cross_entropy(labels: &[usize], probabilities: &Array2<f64>) -> Result<f64, ModelError> {
    if labels.len() != probabilities.nrows() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} labels for {} probability rows",
            labels.len(),
            probabilities.nrows()
        )));
    }
    if labels.is_empty() {
        return Err(ModelError::EmptyMask);
    }
    let classes = probabilities.ncols();
    let mut total = 0.0;
    for (row, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(ModelError::LabelOutOfRange { label, classes });
        }
        total += -probabilities[[row, label]].max(PROBABILITY_FLOOR).ln();
    }
    Ok(total / labels.len() as f64)
}

/// Next-location prediction loss.
pub fn loss_utility(labels: &[usize], probabilities: &Array2<f64>) -> Result<f64, ModelError> {
    cross_entropy(labels, probabilities)
}

/// User re-identification loss.
pub fn loss_privacy(labels: &[usize], probabilities: &Array2<f64>) -> Result<f64, ModelError> {
    cross_entropy(labels, probabilities)
}

/// The combined objective, exactly
/// `-lambda1 * l_r + lambda2 * l_u - lambda3 * l_p`.
pub fn loss_sum(weights: &LagrangeWeights, l_r: f64, l_u: f64, l_p: f64) -> f64 {
    -(weights.lambda1 * l_r) + weights.lambda2 * l_u - weights.lambda3 * l_p
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{arr2, Array2};

    #[test]
    fn reconstruction_zero_on_identity_and_unit_on_all_ones() {
        let x = vec![arr2(&[[0.0, 0.0]]), arr2(&[[0.0, 0.0]])];
        let mask = arr2(&[[1.0, 1.0]]);
        assert_eq!(loss_reconstruction(&x, &x, &mask).unwrap(), 0.0);
        // Four unmasked elements, all off by one.
        let ones = vec![arr2(&[[1.0, 1.0]]), arr2(&[[1.0, 1.0]])];
        assert_eq!(loss_reconstruction(&x, &ones, &mask).unwrap(), 1.0);
    }

    #[test]
    fn reconstruction_is_quadratic_in_the_residual() {
        let x = vec![arr2(&[[0.0, 0.0], [0.0, 0.0]])];
        let r1 = vec![arr2(&[[0.5, 1.0], [0.2, -0.3]])];
        let r2 = vec![arr2(&[[1.0, 2.0], [0.4, -0.6]])];
        let mask = arr2(&[[1.0], [1.0]]);
        let l1 = loss_reconstruction(&x, &r1, &mask).unwrap();
        let l2 = loss_reconstruction(&x, &r2, &mask).unwrap();
        assert_abs_diff_eq!(l2, 4.0 * l1, epsilon = 1e-12);
    }

    #[test]
    fn masked_rows_do_not_contribute() {
        let x = vec![arr2(&[[0.0], [0.0]])];
        let recon = vec![arr2(&[[0.0], [100.0]])];
        let mask = arr2(&[[1.0], [0.0]]);
        assert_eq!(loss_reconstruction(&x, &recon, &mask).unwrap(), 0.0);
        let empty = arr2(&[[0.0], [0.0]]);
        assert!(matches!(loss_reconstruction(&x, &recon, &empty), Err(ModelError::EmptyMask)));
    }

    #[test]
    fn cross_entropy_closed_forms() {
        // Perfect prediction.
        let perfect = arr2(&[[0.0, 1.0, 0.0]]);
        assert_eq!(loss_utility(&[1], &perfect).unwrap(), 0.0);
        // Uniform over four classes.
        let uniform = Array2::from_elem((3, 4), 0.25);
        assert_abs_diff_eq!(loss_utility(&[0, 1, 3], &uniform).unwrap(), 4.0f64.ln(), epsilon = 1e-12);
        // Zero probability on the true class clamps to the floor.
        let wrong = arr2(&[[1.0, 0.0]]);
        assert_abs_diff_eq!(
            loss_privacy(&[1], &wrong).unwrap(),
            -PROBABILITY_FLOOR.ln(),
            epsilon = 1e-9
        );
        assert!(loss_privacy(&[1], &wrong).unwrap().is_finite());
    }

    #[test]
    fn cross_entropy_rejects_bad_labels() {
        let p = Array2::from_elem((2, 3), 1.0 / 3.0);
        assert!(matches!(
            loss_utility(&[0, 3], &p),
            Err(ModelError::LabelOutOfRange { label: 3, classes: 3 })
        ));
    }

    #[test]
    fn sum_loss_examples_and_linearity() {
        let w = LagrangeWeights::new(0.0, 1.0, 0.0).unwrap();
        assert_eq!(loss_sum(&w, 123.0, 2.0, 55.0), 2.0);
        let w = LagrangeWeights::new(0.1, 0.8, 0.1).unwrap();
        assert_abs_diff_eq!(loss_sum(&w, 10.0, 1.0, 2.0), -0.4, epsilon = 1e-12);
        // Linear in each weight: three evaluations per axis collapse to a line.
        let (l_r, l_u, l_p) = (3.0, 1.5, 0.7);
        for axis in 0..3 {
            let at = |v: f64| {
                let mut lambdas = [0.2, 0.6, 0.2];
                lambdas[axis] = v;
                loss_sum(
                    &LagrangeWeights::new(lambdas[0], lambdas[1], lambdas[2]).unwrap(),
                    l_r,
                    l_u,
                    l_p,
                )
            };
            let (a, b, c) = (at(0.0), at(0.5), at(1.0));
            assert_abs_diff_eq!(b, (a + c) / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sum_loss_sign_structure() {
        let w = LagrangeWeights::new(0.3, 0.5, 0.2).unwrap();
        let base = loss_sum(&w, 1.0, 1.0, 1.0);
        // Raising L_R or L_P lowers the objective; raising L_U raises it.
        assert!(loss_sum(&w, 2.0, 1.0, 1.0) < base);
        assert!(loss_sum(&w, 1.0, 2.0, 1.0) > base);
        assert!(loss_sum(&w, 1.0, 1.0, 2.0) < base);
    }

    #[test]
    fn recommended_weight_settings_validate() {
        assert!(LagrangeWeights::new(0.1, 0.6, 0.3).is_ok());
        assert!(LagrangeWeights::new(0.1, 0.8, 0.1).is_ok());
        assert!(LagrangeWeights::new(-0.1, 0.8, 0.1).is_err());
        assert!(LagrangeWeights::new(0.0, 0.0, 0.0).is_err());
    }
}
