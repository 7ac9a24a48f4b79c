//! One detector contract for the recency method and the conformal baselines.
//!
//! A detector is fitted on the training episodes `D_orig`, then sees test
//! episodes one at a time. Each [`ShiftDetector::observe`] call returns the
//! current log-martingale and whether the first alert fired on that step:
//!
//! ```text
//! ψ_j = 1[M_j ≥ C],    j* = min{ j : ψ_j = 1 }
//! ```
//!
//! For the recency method one step is: draw a held-out partner, slot the pair
//! by a fair coin, predict, update the martingale, check the alert, add the
//! episode to the recent pool, fine-tune. The prediction for episode `j`
//! therefore only ever depends on training with ids below `j`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::conformal::{fit_pca, ConformalMartingale, FeatureExtractor};
use crate::config::DetectorConfig;
use crate::episode::{Episode, EpisodeStream, StreamLabel};
use crate::error::{Error, Result};
use crate::martingale::{display_value, AlertState, ExponentialMartingale};
use crate::recency::{make_split, predict_pair, PairExample, RecencyClassifier, RecencyModel, SplitDatasets};
use crate::rng::{tags, Rng};

/// Default number of test episodes before a shifted run counts as missed.
pub const DEFAULT_HORIZON: u64 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Ours,
    Cm,
    CmFv,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Ours, Variant::Cm, Variant::CmFv];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ours => "ours",
            Variant::Cm => "cm",
            Variant::CmFv => "cm_fv",
        }
    }

    /// Column name for the per-step statistic in traces.
    pub fn statistic_name(self) -> &'static str {
        match self {
            Variant::Ours => "y",
            _ => "p",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ours" => Ok(Variant::Ours),
            "cm" => Ok(Variant::Cm),
            "cm_fv" => Ok(Variant::CmFv),
            other => Err(Error::Config(format!("unknown variant '{other}' (expected ours, cm or cm-fv)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub episode_id: u64,
    pub log_value: f64,
    /// Correctness indicator `y` (ours) or conformal p-value (CM, CM-FV).
    pub statistic: f64,
    /// Whether the detector has alerted at or before this step.
    pub alerted: bool,
    /// Whether the first alert fired on this step.
    pub alerted_now: bool,
}

/// Audit entry for one judged pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAudit {
    pub step: u64,
    pub episode_id: u64,
    pub partner_id: u64,
    pub slot_bit: u8,
    pub predicted: u8,
    pub y: u8,
    /// Largest episode id the classifier had been trained on when it judged
    /// this pair.
    pub trained_through: Option<u64>,
}

struct Recency {
    model: Box<dyn RecencyModel>,
    split: SplitDatasets,
    martingale: ExponentialMartingale,
    heldout_order: Vec<usize>,
    cursor: usize,
    heldout_rng: Rng,
    pair_rng: Rng,
    train_rng: Rng,
    trained_through: Option<u64>,
    recycled_from: Option<u64>,
    recent_window: Option<usize>,
    audit: Vec<PairAudit>,
}

impl Recency {
    fn next_partner(&mut self, step: u64) -> &Episode {
        let i = if self.cursor < self.heldout_order.len() {
            self.cursor += 1;
            self.heldout_order[self.cursor - 1]
        } else {
            self.recycled_from.get_or_insert(step);
            self.heldout_rng.random_range(0..self.split.unseen.len())
        };
        &self.split.unseen[i]
    }
}

enum State {
    Recency(Box<Recency>),
    Conformal(Box<ConformalMartingale>),
}

/// A fitted detector of one [`Variant`].
pub struct ShiftDetector {
    variant: Variant,
    config: DetectorConfig,
    dim: usize,
    state: State,
    alert: AlertState,
    last_id: u64,
    steps: u64,
    records: Vec<StepRecord>,
    warnings: Vec<String>,
}

impl fmt::Debug for ShiftDetector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShiftDetector")
            .field("variant", &self.variant)
            .field("steps", &self.steps)
            .field("alert", &self.alert)
            .finish_non_exhaustive()
    }
}

fn check_training(d_orig: &[Episode]) -> Result<usize> {
    let first = d_orig.first().ok_or(Error::Empty("training episodes"))?;
    let dim = first.dim();
    for w in d_orig.windows(2) {
        if w[1].id <= w[0].id {
            return Err(Error::OutOfOrder {
                previous: w[0].id,
                next: w[1].id,
            });
        }
        if w[1].dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: w[1].dim(),
            });
        }
    }
    Ok(dim)
}

impl ShiftDetector {
    /// Fits `variant` on `d_orig`; the recency variant uses the MLP classifier.
    pub fn fit(variant: Variant, d_orig: &[Episode], config: &DetectorConfig) -> Result<Self> {
        config.validate()?;
        let dim = check_training(d_orig)?;
        let root = Rng::from_seed(config.seed);
        match variant {
            Variant::Ours => {
                let model = RecencyClassifier::new(dim, config.classifier.clone(), &mut root.split(tags::INIT))?;
                Self::fit_with_model(d_orig, config, Box::new(model))
            }
            Variant::Cm | Variant::CmFv => {
                let mut warnings = Vec::new();
                let (extractor, bag_points) = if variant == Variant::CmFv {
                    let (fit_on, bag_points) = if config.conformal.pca_holdout {
                        if d_orig.len() < 4 {
                            return Err(Error::InsufficientData(format!(
                                "CM-FV with a held-out projection needs at least 4 training episodes, got {}",
                                d_orig.len()
                            )));
                        }
                        d_orig.split_at(d_orig.len().div_ceil(2))
                    } else {
                        (d_orig, d_orig)
                    };
                    let points: Vec<Vec<f64>> = fit_on.iter().map(|e| e.features.clone()).collect();
                    let fit = fit_pca(&points, config.conformal.pca_components)?;
                    warnings.extend(fit.warning);
                    (fit.extractor, bag_points)
                } else {
                    (FeatureExtractor::Identity, d_orig)
                };
                let cm = ConformalMartingale::new(
                    bag_points,
                    extractor,
                    config.conformal.grid_size,
                    config.threshold,
                    root.split(tags::CONFORMAL),
                )?;
                Ok(Self::assemble(variant, config, dim, d_orig, State::Conformal(Box::new(cm)), warnings))
            }
        }
    }

    /// Fits the recency variant around a caller-supplied model (for example a
    /// scripted stand-in).
    pub fn fit_with_model(d_orig: &[Episode], config: &DetectorConfig, mut model: Box<dyn RecencyModel>) -> Result<Self> {
        config.validate()?;
        let dim = check_training(d_orig)?;
        let root = Rng::from_seed(config.seed);
        let split = make_split(d_orig, config.classifier.fractions, &mut root.split(tags::SPLIT))?;
        let mut train_rng = root.split(tags::TRAIN);
        model.train_initial(&split, &mut train_rng)?;
        let mut heldout_rng = root.split(tags::HELDOUT);
        let mut heldout_order: Vec<usize> = (0..split.unseen.len()).collect();
        heldout_order.shuffle(&mut heldout_rng);
        let trained_through = split.older.iter().chain(&split.recent).map(|e| e.id).max();
        let recency = Recency {
            model,
            split,
            martingale: ExponentialMartingale::new(config.martingale),
            heldout_order,
            cursor: 0,
            heldout_rng,
            pair_rng: root.split(tags::PAIRS),
            train_rng,
            trained_through,
            recycled_from: None,
            recent_window: config.classifier.recent_window,
            audit: Vec::new(),
        };
        Ok(Self::assemble(
            Variant::Ours,
            config,
            dim,
            d_orig,
            State::Recency(Box::new(recency)),
            Vec::new(),
        ))
    }

    fn assemble(
        variant: Variant,
        config: &DetectorConfig,
        dim: usize,
        d_orig: &[Episode],
        state: State,
        warnings: Vec<String>,
    ) -> Self {
        Self {
            variant,
            config: config.clone(),
            dim,
            state,
            alert: AlertState::new(config.threshold),
            last_id: d_orig.last().map_or(0, |e| e.id),
            steps: 0,
            records: Vec::new(),
            warnings,
        }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn alert(&self) -> &AlertState {
        &self.alert
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Current `ln M`.
    pub fn log_value(&self) -> f64 {
        match &self.state {
            State::Recency(r) => r.martingale.log_value(),
            State::Conformal(c) => c.betting().log_value(),
        }
    }

    /// Training partitions (recency variant only).
    pub fn split(&self) -> Option<&SplitDatasets> {
        match &self.state {
            State::Recency(r) => Some(&r.split),
            State::Conformal(_) => None,
        }
    }

    /// Conformal state (CM variants only).
    pub fn conformal(&self) -> Option<&ConformalMartingale> {
        match &self.state {
            State::Conformal(c) => Some(c),
            State::Recency(_) => None,
        }
    }

    pub fn pair_audit(&self) -> &[PairAudit] {
        match &self.state {
            State::Recency(r) => &r.audit,
            State::Conformal(_) => &[],
        }
    }

    /// Step at which held-out partners started being drawn with replacement.
    pub fn recycled_from(&self) -> Option<u64> {
        match &self.state {
            State::Recency(r) => r.recycled_from,
            State::Conformal(_) => None,
        }
    }

    /// Processes one test episode, whose id must exceed every training and
    /// previously observed id.
    pub fn observe(&mut self, episode: &Episode) -> Result<StepRecord> {
        if episode.id <= self.last_id {
            return Err(Error::OutOfOrder {
                previous: self.last_id,
                next: episode.id,
            });
        }
        if episode.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: episode.dim(),
            });
        }
        let step = self.steps + 1;
        let (log_value, statistic) = match &mut self.state {
            State::Recency(r) => {
                let partner = r.next_partner(step).clone();
                let bit = u8::from(r.pair_rng.random_bool(0.5));
                let pair = PairExample::arrange(&partner, episode, bit);
                let (predicted, y) = predict_pair(r.model.as_mut(), &pair)?;
                r.audit.push(PairAudit {
                    step,
                    episode_id: episode.id,
                    partner_id: partner.id,
                    slot_bit: bit,
                    predicted,
                    y,
                    trained_through: r.trained_through,
                });
                r.martingale.update(y == 1);
                r.split.push_recent(episode.clone(), r.recent_window);
                r.model.finetune_step(&r.split, &mut r.train_rng)?;
                r.trained_through = Some(r.trained_through.map_or(episode.id, |t| t.max(episode.id)));
                (r.martingale.log_value(), f64::from(y))
            }
            State::Conformal(c) => {
                let s = c.observe(episode)?;
                (s.log_value, s.p_value)
            }
        };
        let alerted_now = self.alert.check(log_value, step);
        self.steps = step;
        self.last_id = episode.id;
        let record = StepRecord {
            step,
            episode_id: episode.id,
            log_value,
            statistic,
            alerted: self.alert.alerted(),
            alerted_now,
        };
        self.records.push(record);
        Ok(record)
    }

    /// Builds the report for everything observed so far.
    pub fn report(&self, horizon: u64, shifted: bool) -> DetectionReport {
        let discovery_step = self.alert.discovery_step();
        let discovery_episode =
            discovery_step.and_then(|s| self.records.get(s as usize - 1)).map(|r| r.episode_id);
        let mut warnings = self.warnings.clone();
        let recycled_from = self.recycled_from();
        if let Some(step) = recycled_from {
            warnings.push(format!(
                "held-out partners exhausted at step {step}; later partners were drawn with replacement"
            ));
        }
        DetectionReport {
            variant: self.variant,
            horizon,
            steps: self.steps,
            shifted,
            discovery_step,
            discovery_episode,
            false_negative: shifted && discovery_step.is_none(),
            recycled_from,
            warnings,
            epsilon: self.config.epsilon(),
            config: self.config.clone(),
            records: self.records.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub horizon: u64,
    /// Whether the stream is known to contain a shift (for FNR bookkeeping).
    pub shifted: bool,
    /// Stop observing once the alert has fired.
    pub stop_on_alert: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            shifted: false,
            stop_on_alert: false,
        }
    }
}

/// Observes up to `options.horizon` episodes of `test` and reports.
pub fn run_deployment(detector: &mut ShiftDetector, test: &[Episode], options: RunOptions) -> Result<DetectionReport> {
    run_iter(detector, test.iter().cloned().map(Ok), options)
}

/// [`run_deployment`] over a test-labelled [`EpisodeStream`].
pub fn run_stream(detector: &mut ShiftDetector, stream: EpisodeStream, options: RunOptions) -> Result<DetectionReport> {
    if stream.label() != StreamLabel::Test {
        return Err(Error::Config("deployment streams must be labelled test".into()));
    }
    run_iter(detector, stream, options)
}

fn run_iter(
    detector: &mut ShiftDetector,
    episodes: impl IntoIterator<Item = Result<Episode>>,
    options: RunOptions,
) -> Result<DetectionReport> {
    for episode in episodes.into_iter().take(options.horizon as usize) {
        detector.observe(&episode?)?;
        if options.stop_on_alert && detector.alert().alerted() {
            break;
        }
    }
    Ok(detector.report(options.horizon, options.shifted))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub variant: Variant,
    pub horizon: u64,
    pub steps: u64,
    pub shifted: bool,
    pub discovery_step: Option<u64>,
    pub discovery_episode: Option<u64>,
    pub false_negative: bool,
    pub recycled_from: Option<u64>,
    pub warnings: Vec<String>,
    pub epsilon: f64,
    pub config: DetectorConfig,
    #[serde(default, skip_serializing)]
    pub records: Vec<StepRecord>,
}

impl DetectionReport {
    pub fn alerted(&self) -> bool {
        self.discovery_step.is_some()
    }

    /// JSON summary (records are left to the CSV trace).
    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-step trace: `n,y,log_M,M,alerted` (or `p` for the conformal variants).
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,{},log_M,M,alerted", self.variant.statistic_name())?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.step,
                r.statistic,
                r.log_value,
                display_value(r.log_value),
                u8::from(r.alerted)
            )?;
        }
        Ok(())
    }
}
