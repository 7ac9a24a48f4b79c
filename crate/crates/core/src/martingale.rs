//! Exponential Bernoulli martingale and the threshold alert rule.
//!
//! Given correctness indicators `Y_k ∈ {0, 1}` with `S_n = Σ Y_k`,
//!
//! ```text
//! M_n = exp(t · S_n) / (q + p · e^t)^n,    q = 1 − p
//! ```
//!
//! is a nonnegative martingale with `M_0 = 1` whenever the `Y_k` are
//! Bernoulli(p). Doob's maximal inequality then gives
//! `Pr[sup_n M_n ≥ C] ≤ 1/C`, so alerting at the first `n` with `M_n ≥ C`
//! has false-alarm probability at most `1/C`.
//!
//! All arithmetic is done on `ln M_n`, recomputed from the counts
//! `(n, S_n)` after every step so that long runs accumulate no rounding drift.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// `M` is shown as `inf` in traces once `ln M` exceeds this.
pub const DISPLAY_LOG_CLAMP: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleParams {
    /// Exponent scale.
    pub t: f64,
    /// Null success probability; `q` is always `1 − p`.
    pub p: f64,
}

impl Default for MartingaleParams {
    fn default() -> Self {
        Self { t: 1.0, p: 0.5 }
    }
}

impl MartingaleParams {
    pub fn new(t: f64, p: f64) -> Result<Self> {
        let params = Self { t, p };
        params.validate()?;
        Ok(params)
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(Error::Config(format!("t must be positive, got {}", self.t)));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Config(format!("p must lie in (0, 1), got {}", self.p)));
        }
        Ok(())
    }

    /// `ln(q + p·e^t)`, the per-step normalizer.
    pub fn log_normalizer(&self) -> f64 {
        (self.q() + self.p * self.t.exp()).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialMartingale {
    params: MartingaleParams,
    n: u64,
    successes: u64,
    log_value: f64,
}

impl ExponentialMartingale {
    pub fn new(params: MartingaleParams) -> Self {
        Self {
            params,
            n: 0,
            successes: 0,
            log_value: 0.0,
        }
    }

    pub fn params(&self) -> MartingaleParams {
        self.params
    }

    pub fn steps(&self) -> u64 {
        self.n
    }

    pub fn successes(&self) -> u64 {
        self.successes
    }

    pub fn log_value(&self) -> f64 {
        self.log_value
    }

    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }

    /// `t·S_n − n·ln(q + p·e^t)`.
    pub fn closed_form_log(&self) -> f64 {
        self.params.t * self.successes as f64 - self.n as f64 * self.params.log_normalizer()
    }

    /// Folds in one correctness indicator.
    pub fn update(&mut self, correct: bool) {
        self.n += 1;
        self.successes += u64::from(correct);
        self.log_value = self.closed_form_log();
    }

    /// Value-returning form of [`update`](Self::update).
    #[must_use]
    pub fn updated(mut self, correct: bool) -> Self {
        self.update(correct);
        self
    }

    /// One CSV trace row `n,y,log_M,M,alerted`.
    pub fn trace_row(&self, y: bool, alerted: bool) -> String {
        format!(
            "{},{},{},{},{}",
            self.n,
            u8::from(y),
            self.log_value,
            display_value(self.log_value),
            alerted
        )
    }
}

pub const TRACE_HEADER: &str = "n,y,log_M,M,alerted";

/// Formats `exp(log_value)`, clamped to `inf` above `exp(700)`.
pub fn display_value(log_value: f64) -> String {
    if log_value > DISPLAY_LOG_CLAMP {
        "inf".to_string()
    } else {
        log_value.exp().to_string()
    }
}

/// First-crossing alert bookkeeping for a threshold `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlertState {
    threshold: f64,
    discovery_step: Option<u64>,
}

impl AlertState {
    pub fn new(threshold: f64) -> Self {
        assert!(threshold > 0.0, "threshold must be positive");
        Self {
            threshold,
            discovery_step: None,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn alerted(&self) -> bool {
        self.discovery_step.is_some()
    }

    pub fn discovery_step(&self) -> Option<u64> {
        self.discovery_step
    }

    /// Records the first step at which `ln M ≥ ln C`. Returns `true` only on
    /// the step where the alert first fires.
    pub fn check(&mut self, log_value: f64, step: u64) -> bool {
        if self.discovery_step.is_none() && log_value >= self.threshold.ln() {
            self.discovery_step = Some(step);
            return true;
        }
        false
    }

    pub fn check_martingale(&mut self, m: &ExponentialMartingale) -> bool {
        self.check(m.log_value(), m.steps())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullSimulation {
    pub crossing_fraction: f64,
    pub mean_final_value: f64,
    /// Sample standard deviation of `M_N` across trials.
    pub final_value_sd: f64,
}

/// Monte Carlo run of the martingale on i.i.d. Bernoulli(`params.p`) inputs.
pub fn simulate_null(
    params: MartingaleParams,
    horizon: u64,
    trials: u64,
    threshold: f64,
    rng: &Rng,
) -> NullSimulation {
    simulate_bernoulli(params, params.p, horizon, trials, threshold, rng)
}

/// Same as [`simulate_null`], but the inputs are Bernoulli(`true_p`) while the
/// martingale keeps its own `params`.
pub fn simulate_bernoulli(
    params: MartingaleParams,
    true_p: f64,
    horizon: u64,
    trials: u64,
    threshold: f64,
    rng: &Rng,
) -> NullSimulation {
    assert!(horizon >= 1 && trials >= 1, "horizon and trials must be >= 1");
    let outcomes: Vec<(bool, f64)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng.split_index(trial);
            let mut m = ExponentialMartingale::new(params);
            let mut alert = AlertState::new(threshold);
            for _ in 0..horizon {
                m.update(rng.random_bool(true_p));
                alert.check_martingale(&m);
            }
            (alert.alerted(), m.value())
        })
        .collect();
    let n = outcomes.len() as f64;
    let crossed = outcomes.iter().filter(|(c, _)| *c).count() as f64;
    let mean = outcomes.iter().map(|(_, v)| v).sum::<f64>() / n;
    let var = outcomes.iter().map(|(_, v)| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    NullSimulation {
        crossing_fraction: crossed / n,
        mean_final_value: mean,
        final_value_sd: var.sqrt(),
    }
}

/// Smallest `n` at which an uninterrupted run of correct predictions reaches
/// `threshold`.
pub fn all_correct_crossing_step(params: MartingaleParams, threshold: f64) -> u64 {
    let per_step = params.t - params.log_normalizer();
    assert!(per_step > 0.0, "all-correct streak never grows");
    let mut m = ExponentialMartingale::new(params);
    let mut alert = AlertState::new(threshold);
    loop {
        m.update(true);
        if alert.check_martingale(&m) {
            return m.steps();
        }
    }
}
