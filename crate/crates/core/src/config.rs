use serde::{Deserialize, Serialize};

use crate::conformal::ConformalConfig;
use crate::error::{Error, Result};
use crate::martingale::MartingaleParams;
use crate::recency::ClassifierConfig;

/// Alert threshold used throughout; gives a false-alarm bound of 0.01.
pub const DEFAULT_THRESHOLD: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Alert level `C`; the false-alarm probability is at most `1/C`.
    pub threshold: f64,
    pub seed: u64,
    pub classifier: ClassifierConfig,
    pub martingale: MartingaleParams,
    pub conformal: ConformalConfig,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            seed: 0,
            classifier: ClassifierConfig::default(),
            martingale: MartingaleParams::default(),
            conformal: ConformalConfig::default(),
        }
    }
}

impl DetectorConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Guaranteed false-positive bound `ε = 1/C`.
    pub fn epsilon(&self) -> f64 {
        1.0 / self.threshold
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold.is_finite() && self.threshold > 1.0) {
            return Err(Error::Config(format!("threshold must exceed 1, got {}", self.threshold)));
        }
        if self.conformal.pca_components == 0 || self.conformal.grid_size == 0 {
            return Err(Error::Config("pca_components and grid_size must be positive".into()));
        }
        self.martingale.validate()?;
        self.classifier.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_is_reciprocal_threshold() {
        let c = DetectorConfig::default();
        assert_eq!(c.epsilon(), 0.01);
        let c = DetectorConfig { threshold: 20.0, ..c };
        assert_eq!(c.epsilon(), 1.0 / 20.0);
    }

    #[test]
    fn threshold_must_exceed_one() {
        for t in [1.0, 0.5, -3.0, f64::NAN, f64::INFINITY] {
            let c = DetectorConfig { threshold: t, ..DetectorConfig::default() };
            assert!(c.validate().is_err(), "{t}");
        }
        assert!(DetectorConfig::default().validate().is_ok());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: DetectorConfig = serde_json::from_str(r#"{"seed": 9, "classifier": {"learning_rate": 0.001}}"#).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.threshold, 100.0);
        assert_eq!(c.classifier.learning_rate, 1e-3);
        assert_eq!(c.classifier.batch_size, 32);
        let back: DetectorConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
