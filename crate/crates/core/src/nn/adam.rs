use serde::{Deserialize, Serialize};

use super::{Gradients, MlpModel};
use crate::error::{Error, Result};

/// Adam optimizer state with bias correction.
///
/// Moment buffers are stored per parameter slice in the order weights,
/// bias for each layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_stability: f64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;

    pub fn new(model: &MlpModel) -> Self {
        Self::with_learning_rate(model, Self::DEFAULT_LEARNING_RATE)
    }

    pub fn with_learning_rate(model: &MlpModel, learning_rate: f64) -> Self {
        let shapes: Vec<Vec<f64>> = model
            .weights()
            .iter()
            .zip(model.biases())
            .flat_map(|(w, b)| [vec![0.0; w.as_slice().len()], vec![0.0; b.len()]])
            .collect();
        Self {
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps_stability: 1e-8,
            first_moment: shapes.clone(),
            second_moment: shapes,
        }
    }

    pub(crate) fn check_shapes(&self, model: &MlpModel) -> Result<()> {
        let expected: Vec<usize> = model
            .weights()
            .iter()
            .zip(model.biases())
            .flat_map(|(w, b)| [w.as_slice().len(), b.len()])
            .collect();
        let found: Vec<usize> = self.first_moment.iter().map(Vec::len).collect();
        let found2: Vec<usize> = self.second_moment.iter().map(Vec::len).collect();
        if expected != found || expected != found2 {
            return Err(Error::Config(format!(
                "optimizer shapes {found:?} do not match model shapes {expected:?}"
            )));
        }
        Ok(())
    }

    pub(crate) fn apply(&mut self, model: &mut MlpModel, grads: &Gradients) -> Result<()> {
        self.check_shapes(model)?;
        let grad_slices: Vec<&[f64]> = grads
            .weights
            .iter()
            .zip(&grads.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect();
        if grad_slices.len() != self.first_moment.len()
            || grad_slices
                .iter()
                .zip(&self.first_moment)
                .any(|(g, m)| g.len() != m.len())
        {
            return Err(Error::Config("gradient shapes do not match the model".into()));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.eps_stability);
        let first = &mut self.first_moment;
        let second = &mut self.second_moment;
        model.for_each_param_mut(|slot, params| {
            let g = grad_slices[slot];
            let m = &mut first[slot];
            let v = &mut second[slot];
            for i in 0..params.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor2;

    fn scalar_model(w: f64) -> MlpModel {
        MlpModel::from_parameters(
            vec![1, 1],
            vec![Tensor2::from_vec(1, 1, vec![w]).unwrap()],
            vec![vec![0.0]],
        )
        .unwrap()
    }

    fn grads(gw: f64, gb: f64) -> Gradients {
        Gradients {
            weights: vec![Tensor2::from_vec(1, 1, vec![gw]).unwrap()],
            biases: vec![vec![gb]],
        }
    }

    #[test]
    fn defaults() {
        let s = AdamState::new(&scalar_model(0.0));
        assert_eq!(
            (s.learning_rate, s.beta1, s.beta2, s.eps_stability, s.step_count),
            (1e-4, 0.9, 0.999, 1e-8, 0)
        );
    }

    #[test]
    fn first_step_moves_by_learning_rate_against_gradient() {
        for g in [3.5, -0.02, 1e-3] {
            let mut model = scalar_model(0.7);
            let mut state = AdamState::new(&model);
            model.adam_step(&grads(g, 0.0), &mut state).unwrap();
            let w = model.weights()[0].get(0, 0);
            // Step one reduces to lr * g / (|g| + eps).
            let expected = 0.7 - 1e-4 * g / (g.abs() + 1e-8);
            assert!((w - expected).abs() < 1e-15, "g={g}: {w} vs {expected}");
            assert!((w - 0.7).abs() <= 1e-4 * (1.0 + 1e-9));
            assert_eq!(state.step_count, 1);
        }
    }

    #[test]
    fn zero_gradient_only_advances_the_step() {
        let mut model = scalar_model(0.25);
        let before = model.flatten();
        let mut state = AdamState::new(&model);
        model.adam_step(&grads(0.0, 0.0), &mut state).unwrap();
        assert_eq!(model.flatten(), before);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn identical_calls_are_deterministic() {
        let run = || {
            let mut model = scalar_model(-0.4);
            let mut state = AdamState::new(&model);
            model.adam_step(&grads(0.3, -0.1), &mut state).unwrap();
            model.adam_step(&grads(0.2, 0.5), &mut state).unwrap();
            (model.flatten(), state)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let mut model = scalar_model(0.0);
        let mut state = AdamState::new(&MlpModel::zeros(&[2, 1]).unwrap());
        assert!(model.adam_step(&grads(1.0, 1.0), &mut state).is_err());
        let mut state = AdamState::new(&model);
        let bad = Gradients {
            weights: vec![Tensor2::zeros(1, 2)],
            biases: vec![vec![0.0]],
        };
        assert!(model.adam_step(&bad, &mut state).is_err());
    }
}
