use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of grid points.
pub const DEFAULT_GRID_SIZE: usize = 100;

/// Composite power martingale over a grid `ε_k = k/K`, `k = 1..K`:
///
/// ```text
/// ln M^(ε)_n = Σ_j [ln ε + (ε − 1) · ln p_j]
/// M_n        = (1/K) Σ_k M^(ε_k)_n
/// ```
///
/// Each `ε·p^(ε−1)` integrates to 1 over `p ∈ (0, 1)`, so every term and
/// their average are martingales under uniform p-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BettingMartingale {
    epsilon_grid: Vec<f64>,
    per_epsilon_log_values: Vec<f64>,
    log_value: f64,
    steps: u64,
}

impl Default for BettingMartingale {
    fn default() -> Self {
        Self::new(DEFAULT_GRID_SIZE)
    }
}

impl BettingMartingale {
    pub fn new(grid_size: usize) -> Self {
        assert!(grid_size >= 1, "grid must have at least one point");
        let k = grid_size as f64;
        Self {
            epsilon_grid: (1..=grid_size).map(|i| i as f64 / k).collect(),
            per_epsilon_log_values: vec![0.0; grid_size],
            log_value: 0.0,
            steps: 0,
        }
    }

    pub fn epsilon_grid(&self) -> &[f64] {
        &self.epsilon_grid
    }

    pub fn per_epsilon_log_values(&self) -> &[f64] {
        &self.per_epsilon_log_values
    }

    pub fn log_value(&self) -> f64 {
        self.log_value
    }

    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn update(&mut self, p: f64) -> Result<()> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidPValue(p));
        }
        let ln_p = p.ln();
        for (l, &e) in self.per_epsilon_log_values.iter_mut().zip(&self.epsilon_grid) {
            *l += e.ln() + (e - 1.0) * ln_p;
        }
        self.log_value = log_mean_exp(&self.per_epsilon_log_values);
        self.steps += 1;
        Ok(())
    }
}

fn log_mean_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + (sum / values.len() as f64).ln()
}
