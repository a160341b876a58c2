//! Adam optimizer with per-group state and global-norm gradient clipping.
//!
//! Each parameter group (encoder, decoder, heads) owns one state: a step
//! counter plus first/second moments aligned tensor-for-tensor with the
//! group's parameters. Clipping rescales the whole group's gradient when
//! its global L2 norm exceeds the threshold, which keeps the maximized
//! (negative-coefficient) loss terms from blowing up early training.

use ndarray::{Array2, Zip};

use crate::error::ModelError;

/// Optimizer hyper-parameters; lifted out of the training config per step.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global-norm clip per parameter group; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

/// First and second moment estimates for one tensor.
#[derive(Debug, Clone)]
pub struct Moments {
    pub m: Array2<f64>,
    pub v: Array2<f64>,
}

/// Optimizer state for one parameter group.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub moments: Vec<Moments>,
}

impl AdamState {
    /// Fresh state with zero moments shaped like the given tensors.
    pub fn new(tensors: &[&Array2<f64>]) -> AdamState {
        AdamState {
            step: 0,
            moments: tensors
                .iter()
                .map(|t| Moments { m: Array2::zeros(t.raw_dim()), v: Array2::zeros(t.raw_dim()) })
                .collect(),
        }
    }

    /// One update over a group's tensors. Gradients are clipped jointly,
    /// then each tensor gets the standard bias-corrected Adam step.
    pub fn apply(
        &mut self,
        config: &AdamConfig,
        tensors: &mut [&mut Array2<f64>],
        grads: &[Array2<f64>],
    ) -> Result<(), ModelError> {
        if tensors.len() != grads.len() || tensors.len() != self.moments.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "optimizer got {} tensors, {} gradients, {} moment slots",
                tensors.len(),
                grads.len(),
                self.moments.len()
            )));
        }
        let mut squared_norm = 0.0;
        for (index, grad) in grads.iter().enumerate() {
            for &value in grad.iter() {
                if !value.is_finite() {
                    return Err(ModelError::NonFinite {
                        what: "gradient",
                        location: format!("group tensor {index}"),
                    });
                }
                squared_norm += value * value;
            }
        }
        let scale = match config.clip_norm {
            Some(clip) if squared_norm.sqrt() > clip => clip / squared_norm.sqrt(),
            _ => 1.0,
        };

        self.step += 1;
        let correction1 = 1.0 - config.beta1.powi(self.step as i32);
        let correction2 = 1.0 - config.beta2.powi(self.step as i32);
        for ((tensor, grad), moments) in tensors.iter_mut().zip(grads).zip(&mut self.moments) {
            if tensor.raw_dim() != grad.raw_dim() {
                return Err(ModelError::ShapeMismatch(format!(
                    "parameter {:?} vs gradient {:?}",
                    tensor.shape(),
                    grad.shape()
                )));
            }
            Zip::from(&mut **tensor).and(grad).and(&mut moments.m).and(&mut moments.v).for_each(
                |param, &raw, m, v| {
                    let g = raw * scale;
                    *m = config.beta1 * *m + (1.0 - config.beta1) * g;
                    *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
                    let m_hat = *m / correction1;
                    let v_hat = *v / correction2;
                    *param -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
                },
            );
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn config() -> AdamConfig {
        AdamConfig {
            learning_rate: 0.001,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: Some(5.0),
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut param = arr2(&[[1.0, -2.0], [0.5, 3.0]]);
        let original = param.clone();
        let mut state = AdamState::new(&[&param]);
        for _ in 0..3 {
            state
                .apply(&config(), &mut [&mut param], &[Array2::zeros((2, 2))])
                .unwrap();
        }
        assert_eq!(param, original);
        assert_eq!(state.step, 3);
    }

    #[test]
    fn first_step_magnitude_is_close_to_the_learning_rate() {
        // Closed form from the update rule: with fresh moments and gradient
        // g, the bias corrections cancel and the step is
        // lr * g / (|g| + eps), i.e. lr * sign(g) up to the epsilon term.
        let mut param = arr2(&[[0.0, 0.0]]);
        let grad = arr2(&[[0.01, -0.02]]);
        let mut state = AdamState::new(&[&param]);
        state.apply(&config(), &mut [&mut param], &[grad]).unwrap();
        let expected = |g: f64| -0.001 * g / (g.abs() + 1e-8);
        assert!((param[[0, 0]] - expected(0.01)).abs() < 1e-12);
        assert!((param[[0, 1]] - expected(-0.02)).abs() < 1e-12);
        assert!((param[[0, 0]].abs() - 0.001).abs() / 0.001 < 1e-5);
    }

    #[test]
    fn equal_gradients_produce_equal_updates() {
        let mut param = arr2(&[[1.0, 1.0]]);
        let grad = arr2(&[[0.3, 0.3]]);
        let mut state = AdamState::new(&[&param]);
        state.apply(&config(), &mut [&mut param], &[grad]).unwrap();
        assert_eq!(param[[0, 0]], param[[0, 1]]);
    }

    #[test]
    fn oversized_gradients_are_clipped_to_the_global_norm() {
        // A gradient of norm 10 with clip 5.0 behaves exactly like the same
        // direction at half the magnitude.
        let mut clipped = arr2(&[[0.0; 2]; 1]);
        let mut manual = clipped.clone();
        let mut s1 = AdamState::new(&[&clipped]);
        let mut s2 = AdamState::new(&[&manual]);
        s1.apply(&config(), &mut [&mut clipped], &[arr2(&[[6.0, 8.0]])]).unwrap();
        s2.apply(&config(), &mut [&mut manual], &[arr2(&[[3.0, 4.0]])]).unwrap();
        assert_eq!(clipped, manual);
    }

    #[test]
    fn non_finite_gradients_are_fatal_and_leave_state_untouched() {
        let mut param = arr2(&[[1.0]]);
        let mut state = AdamState::new(&[&param]);
        let err = state.apply(&config(), &mut [&mut param], &[arr2(&[[f64::NAN]])]);
        assert!(matches!(err, Err(ModelError::NonFinite { what: "gradient", .. })));
        assert_eq!(state.step, 0);
        assert_eq!(param[[0, 0]], 1.0);
    }
}
