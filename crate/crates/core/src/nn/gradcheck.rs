//! Central finite-difference check of [`MlpModel::backward`].
//!
//! The numerical side only calls `forward` and [`bce_loss`], so it shares no
//! code with the analytic backward pass.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{bce_loss, init_weights, MlpModel, Tensor2};
use crate::error::Result;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub step: f64,
    /// Analytic gradients smaller than this are compared absolutely.
    pub absolute_floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            absolute_floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub parameters: usize,
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub worst_parameter: usize,
}

fn loss_of(model: &MlpModel, batch: &Tensor2, labels: &[f64]) -> Result<f64> {
    let (probs, _) = model.forward(batch)?;
    bce_loss(&probs, labels)
}

pub fn check_gradients(
    model: &MlpModel,
    batch: &Tensor2,
    labels: &[f64],
    config: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let (_, cache) = model.forward(batch)?;
    let analytic = model.backward(&cache, labels)?.flatten();
    let base = model.flatten();
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        parameters: base.len(),
        max_relative_error: 0.0,
        max_absolute_error: 0.0,
        worst_parameter: 0,
    };
    for (i, &a) in analytic.iter().enumerate() {
        probe.set_flat(i, base[i] + config.step);
        let up = loss_of(&probe, batch, labels)?;
        probe.set_flat(i, base[i] - config.step);
        let down = loss_of(&probe, batch, labels)?;
        probe.set_flat(i, base[i]);
        let numeric = (up - down) / (2.0 * config.step);
        let abs_err = (a - numeric).abs();
        let err = if a.abs() < config.absolute_floor {
            abs_err
        } else {
            abs_err / a.abs().max(numeric.abs())
        };
        report.max_absolute_error = report.max_absolute_error.max(abs_err);
        if err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst_parameter = i;
        }
    }
    Ok(report)
}

/// Gradient check on a random `dims` network (He weights, uniform biases) and a
/// random batch.
pub fn random_check(dims: &[usize], batch_rows: usize, seed: u64) -> Result<GradCheckReport> {
    let root = Rng::from_seed(seed);
    let mut init = root.split(crate::rng::tags::INIT);
    let he = init_weights(dims, &mut init)?;
    let mut data = root.split("gradcheck-data");
    // Nonzero biases keep pre-activations off the ReLU kink even when a
    // whole layer below is inactive.
    let biases = he
        .biases()
        .iter()
        .map(|b| b.iter().map(|_| data.random_range(-0.5..0.5)).collect())
        .collect();
    let model = MlpModel::from_parameters(dims.to_vec(), he.weights().to_vec(), biases)?;
    let values = (0..batch_rows * dims[0])
        .map(|_| data.random_range(-1.0..1.0))
        .collect();
    let batch = Tensor2::from_vec(batch_rows, dims[0], values)?;
    let labels: Vec<f64> = (0..batch_rows)
        .map(|_| f64::from(u8::from(data.random_bool(0.5))))
        .collect();
    check_gradients(&model, &batch, &labels, &GradCheckConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deep_networks_pass() {
        for seed in 0..5 {
            let r = random_check(&[6, 7, 5, 4, 1], 8, seed).unwrap();
            assert!(r.max_relative_error < 1e-4, "seed {seed}: {r:?}");
        }
    }
}
