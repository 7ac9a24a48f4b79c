//! Conformal-martingale baselines (CM and CM-FV).
//!
//! Every observed point gets a nonconformity score `α_i`, its distance to the
//! nearest other point. A new point's smoothed conformal p-value is
//!
//! ```text
//! p_j = (#{i ≤ j : α_i > α_j} + θ_j · #{i ≤ j : α_i = α_j}) / j,   θ_j ~ U(0, 1]
//! ```
//!
//! which is uniform under exchangeability. The p-values drive a composite
//! power martingale `(1/K) Σ_k Π_j ε_k · p_j^(ε_k − 1)`, alerting at `C` as for
//! the recency detector.
//!
//! CM-FV runs the same procedure on a PCA projection fitted to the training
//! data.

mod bag;
mod betting;
mod pca;
mod pvalue;

pub use bag::{nonconformity, NonconformityBag};
pub use betting::{BettingMartingale, DEFAULT_GRID_SIZE};
pub use pca::{fit_pca, FeatureExtractor, PcaBasis, PcaFit, DEFAULT_COMPONENTS};
pub use pvalue::conformal_p;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::episode::Episode;
use crate::error::Result;
use crate::martingale::AlertState;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConformalConfig {
    pub pca_components: usize,
    pub grid_size: usize,
    /// Fit the CM-FV projection on the first half of the training episodes
    /// and seed the bag with the second half only. A projection fitted on the
    /// bag's own points spreads those points more than fresh ones, which
    /// biases later p-values upward.
    pub pca_holdout: bool,
}

impl Default for ConformalConfig {
    fn default() -> Self {
        Self {
            pca_components: DEFAULT_COMPONENTS,
            grid_size: DEFAULT_GRID_SIZE,
            pca_holdout: true,
        }
    }
}

/// Outcome of one [`ConformalMartingale::observe`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalStep {
    pub score: f64,
    pub p_value: f64,
    pub log_value: f64,
    pub alerted_now: bool,
}

/// Streaming CM detector state: bag, betting martingale, tie-break stream.
#[derive(Debug, Clone)]
pub struct ConformalMartingale {
    extractor: FeatureExtractor,
    bag: NonconformityBag,
    betting: BettingMartingale,
    alert: AlertState,
    tie_break: Rng,
}

impl ConformalMartingale {
    /// Seeds the bag with the (extracted) training points.
    pub fn new(
        training: &[Episode],
        extractor: FeatureExtractor,
        grid_size: usize,
        threshold: f64,
        tie_break: Rng,
    ) -> Result<Self> {
        let points = training
            .iter()
            .map(|e| extractor.transform(&e.features))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            extractor,
            bag: NonconformityBag::from_points(points)?,
            betting: BettingMartingale::new(grid_size),
            alert: AlertState::new(threshold),
            tie_break,
        })
    }

    pub fn bag(&self) -> &NonconformityBag {
        &self.bag
    }

    pub fn betting(&self) -> &BettingMartingale {
        &self.betting
    }

    pub fn alert(&self) -> &AlertState {
        &self.alert
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    /// Scores the episode against the bag, inserts it, and bets on its p-value.
    pub fn observe(&mut self, episode: &Episode) -> Result<ConformalStep> {
        let x = self.extractor.transform(&episode.features)?;
        let score = self.bag.insert(x)?;
        let theta = 1.0 - self.tie_break.random::<f64>();
        let p_value = conformal_p(self.bag.scores(), theta)?;
        self.betting.update(p_value)?;
        let alerted_now = self.alert.check(self.betting.log_value(), self.betting.steps());
        Ok(ConformalStep {
            score,
            p_value,
            log_value: self.betting.log_value(),
            alerted_now,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn stream(n: usize, dim: usize, mean: f64, first_id: u64, rng: &mut Rng) -> Vec<Episode> {
        (0..n)
            .map(|i| {
                let f = (0..dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut *rng);
                        mean + z
                    })
                    .collect();
                Episode::new(first_id + i as u64, f).unwrap()
            })
            .collect()
    }

    #[test]
    fn duplicate_of_training_point_does_not_grow() {
        let mut rng = Rng::from_seed(1);
        let train = stream(20, 3, 0.0, 0, &mut rng);
        let mut cm = ConformalMartingale::new(&train, FeatureExtractor::Identity, 100, 100.0, rng.split("t")).unwrap();
        let dup = Episode::new(100, train[4].features.clone()).unwrap();
        let step = cm.observe(&dup).unwrap();
        assert_eq!(step.score, 0.0);
        assert!(step.p_value > 0.9);
        assert!(step.log_value < 0.0);
    }

    #[test]
    fn identity_extractor_reproduces_plain_cm() {
        let mut rng = Rng::from_seed(2);
        let train = stream(30, 4, 0.0, 0, &mut rng);
        let test = stream(40, 4, 0.5, 30, &mut rng);
        let run = |ex: FeatureExtractor| {
            let mut cm = ConformalMartingale::new(&train, ex, 100, 100.0, Rng::from_seed(5)).unwrap();
            test.iter().map(|e| cm.observe(e).unwrap().log_value).collect::<Vec<_>>()
        };
        assert_eq!(run(FeatureExtractor::Identity), run(FeatureExtractor::Identity));
        let full = fit_pca(&train.iter().map(|e| e.features.clone()).collect::<Vec<_>>(), 4).unwrap();
        let rotated = run(full.extractor);
        let plain = run(FeatureExtractor::Identity);
        // A full orthonormal basis is an isometry, so only rounding differs.
        for (a, b) in rotated.iter().zip(&plain) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn strong_mean_shift_is_detected_quickly() {
        let mut detected = 0;
        for seed in 0..20 {
            let mut rng = Rng::from_seed(seed);
            let train = stream(100, 8, 0.0, 0, &mut rng);
            let test = stream(100, 8, 3.0, 100, &mut rng);
            let mut cm = ConformalMartingale::new(&train, FeatureExtractor::Identity, 100, 100.0, rng.split("t")).unwrap();
            if test.iter().any(|e| cm.observe(e).unwrap().alerted_now) {
                detected += 1;
            }
        }
        assert!(detected >= 18, "{detected}/20");
    }
}
