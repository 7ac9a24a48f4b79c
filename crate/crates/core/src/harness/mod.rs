//! Experiment protocol: many seeded trials, one summary table.
//!
//! Trial `i` of an experiment with master seed `s` draws everything from
//!
//! ```text
//! root_i = Rng(s) / "trial" / i
//! ```
//!
//! so a trial's outcome depends only on `(s, i)`. Trials may run on any number
//! of worker threads; results are reduced in trial order, which makes every
//! artifact a pure function of the spec.
//!
//! Discovery-time summaries follow the usual convention for this kind of
//! table: the mean is taken over true positives only, and a variant that
//! misses at least 95% of shifted trials is reported as a failure with no
//! mean. The median is censored: a missed trial counts as `+∞`, so a median
//! only exists when fewer than half the trials missed.

mod plot;

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::DetectorConfig;
use crate::datagen::{failure_step, generate_range, Family, GeneratorSpec, ShiftSchedule};
use crate::detector::{run_deployment, DetectionReport, RunOptions, ShiftDetector, Variant, DEFAULT_HORIZON};
use crate::error::{Error, Result};
use crate::nn::gradcheck::random_check;
use crate::recency::{
    make_split, pair_accuracy, ConstantClassifier, PairExample, RecencyClassifier, RecencyModel,
};
use crate::rng::{tags, Rng};
use crate::stats::binomial_two_sided_p;

pub use plot::emit_trace_plot_data;

/// Version string embedded in every artifact.
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

/// FNR at or above which a variant is reported as a failure.
pub const FAILURE_FNR: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Full detectors on unshifted streams; checks the alert rate.
    FprNull,
    /// Shifted stream; checks the median ordering `ours < cm_fv < cm`.
    DetectionOrdering,
    /// Brightness drift with a failure floor; checks that ours alerts first.
    AlertBeforeFailure,
    /// Fair-coin stand-in classifier through the full detector.
    MartingaleDoob,
    /// Accuracy of fixed classifiers on exchangeable pairs.
    FairCoin,
    /// Analytic vs finite-difference gradients on random MLPs.
    Gradcheck,
}

impl ExperimentKind {
    fn runs_detectors(self) -> bool {
        matches!(
            self,
            Self::FprNull | Self::DetectionOrdering | Self::AlertBeforeFailure | Self::MartingaleDoob
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: ExperimentKind,
    pub trials: u64,
    pub seed: u64,
    /// Per-trial generator; its `seed` is replaced by a trial-derived one.
    pub generator: GeneratorSpec,
    pub train_episodes: usize,
    pub horizon: u64,
    pub variants: Vec<Variant>,
    /// Shared detector configuration; its `seed` is replaced per trial.
    pub detector: DetectorConfig,
    /// Stop each run at its first alert (trace trials always run the full
    /// horizon).
    pub stop_on_alert: bool,
    /// Leading trials whose per-step traces are written.
    pub trace_trials: u64,
    /// `alert_before_failure`: brightness-proxy floor that defines failure.
    pub failure_floor: f64,
    /// `alert_before_failure`: required fraction of trials alerting in time.
    pub min_success_fraction: f64,
    /// `fair_coin`: pairs per classifier per trial.
    pub pairs: usize,
    /// `fair_coin`: allowed distance of each accuracy from one half.
    pub accuracy_tolerance: f64,
    /// `gradcheck`: layer widths of the random networks.
    pub gradcheck_dims: Vec<usize>,
    /// `gradcheck`: batch rows per check.
    pub gradcheck_batch: usize,
    /// `gradcheck`: bound on the maximum relative error.
    pub gradcheck_tolerance: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: ExperimentKind::FprNull,
            trials: 100,
            seed: 0,
            generator: GeneratorSpec::default(),
            train_episodes: 300,
            horizon: DEFAULT_HORIZON,
            variants: vec![Variant::Ours],
            detector: DetectorConfig::default(),
            stop_on_alert: true,
            trace_trials: 1,
            failure_floor: 0.4,
            min_success_fraction: 0.95,
            pairs: 10_000,
            accuracy_tolerance: 0.015,
            gradcheck_dims: vec![10, 12, 8, 6, 1],
            gradcheck_batch: 6,
            gradcheck_tolerance: 1e-4,
        }
    }
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        self.generator.validate()?;
        self.detector.validate()?;
        let shifted = self.generator.schedule.is_shifted();
        match self.name {
            ExperimentKind::FprNull | ExperimentKind::MartingaleDoob | ExperimentKind::FairCoin if shifted => {
                return Err(Error::Config(format!("{:?} needs an unshifted generator", self.name)));
            }
            ExperimentKind::DetectionOrdering | ExperimentKind::AlertBeforeFailure if !shifted => {
                return Err(Error::Config(format!("{:?} needs a shifted generator", self.name)));
            }
            _ => {}
        }
        if self.name.runs_detectors() {
            if self.variants.is_empty() {
                return Err(Error::Config("at least one variant is required".into()));
            }
            let mut seen = self.variants.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != self.variants.len() {
                return Err(Error::Config("variants must be distinct".into()));
            }
            if self.train_episodes == 0 {
                return Err(Error::Config("train_episodes must be at least 1".into()));
            }
        }
        match self.name {
            ExperimentKind::MartingaleDoob if self.variants != [Variant::Ours] => {
                Err(Error::Config("martingale_doob runs the ours variant only".into()))
            }
            ExperimentKind::AlertBeforeFailure => {
                if !self.variants.contains(&Variant::Ours) {
                    return Err(Error::Config("alert_before_failure needs the ours variant".into()));
                }
                if self.generator.family != Family::SyntheticImageBrightness {
                    return Err(Error::UnsupportedFamily("alert_before_failure is defined for brightness drift"));
                }
                if !(0.0..=1.0).contains(&self.min_success_fraction) {
                    return Err(Error::Config("min_success_fraction must lie in [0, 1]".into()));
                }
                Ok(())
            }
            ExperimentKind::DetectionOrdering if !self.variants.contains(&Variant::Ours) => {
                Err(Error::Config("detection_ordering needs the ours variant".into()))
            }
            ExperimentKind::FairCoin if self.pairs == 0 => Err(Error::Config("pairs must be at least 1".into())),
            ExperimentKind::Gradcheck if self.gradcheck_dims.len() < 2 || self.gradcheck_dims.contains(&0) => {
                Err(Error::Config("gradcheck_dims needs at least two positive widths".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Seeds handed to one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSeeds {
    pub generator: u64,
    pub detector: u64,
}

impl TrialSeeds {
    pub fn derive(master_seed: u64, trial: u64) -> Self {
        let root = Rng::from_seed(master_seed).split(tags::TRIAL).split_index(trial);
        Self {
            generator: root.split("generator").derive_seed(),
            detector: root.split("detector").derive_seed(),
        }
    }
}

/// One variant's outcome in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub variant: Variant,
    pub seeds: TrialSeeds,
    pub steps: u64,
    pub discovery_step: Option<u64>,
    pub discovery_episode: Option<u64>,
    pub false_negative: bool,
    pub recycled_from: Option<u64>,
    pub error: Option<String>,
}

/// Per-variant row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRow {
    pub variant: Variant,
    pub trials: u64,
    pub alerts: u64,
    /// Mean discovery step over true positives; absent for failures.
    pub mean_discovery: Option<f64>,
    /// Censored median discovery step; absent when half or more missed.
    pub median_discovery: Option<f64>,
    pub false_negative_rate: Option<f64>,
    pub false_positive_rate: Option<f64>,
    pub failure: bool,
    pub recycled_trials: u64,
    pub failed_trials: u64,
}

/// A named scalar that is not tied to a detector variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
}

/// One pass/fail assertion of the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub version: String,
    pub spec: ExperimentSpec,
    pub rows: Vec<VariantRow>,
    pub measurements: Vec<Measurement>,
    pub checks: Vec<Check>,
    /// `(trial, message)` for every trial that errored.
    pub trial_errors: Vec<(u64, String)>,
}

impl SummaryTable {
    pub fn passed(&self) -> bool {
        self.trial_errors.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn row(&self, variant: Variant) -> Option<&VariantRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Variant rows, or measurements for experiments without detectors.
    pub fn to_csv(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map_or_else(String::new, |x| x.to_string())
        }
        let mut out = String::new();
        if self.spec.name.runs_detectors() {
            out.push_str("variant,trials,alerts,mean_discovery,median_discovery,fnr,fpr,failure\n");
            for r in &self.rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.variant,
                    r.trials,
                    r.alerts,
                    if r.failure { "failure".into() } else { opt(r.mean_discovery) },
                    opt(r.median_discovery),
                    opt(r.false_negative_rate),
                    opt(r.false_positive_rate),
                    u8::from(r.failure)
                ));
            }
        } else {
            out.push_str("name,value\n");
            for m in &self.measurements {
                out.push_str(&format!("{},{}\n", m.name, m.value));
            }
        }
        out
    }
}

/// Median with misses counted as `+∞`; `None` when the median itself is a
/// miss.
pub fn censored_median(discoveries: &[Option<u64>]) -> Option<f64> {
    if discoveries.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = discoveries.iter().map(|d| d.map_or(f64::INFINITY, |s| s as f64)).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let m = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    m.is_finite().then_some(m)
}

/// Everything a run produced, before it is written anywhere.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub summary: SummaryTable,
    pub trials: Vec<TrialOutcome>,
    /// Full reports of the trace trials, grouped per trial.
    pub traces: Vec<(u64, Vec<DetectionReport>)>,
}

/// Runs `spec` on `jobs` worker threads (all cores when `None`).
pub fn run(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<ExperimentOutput> {
    spec.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match spec.name {
        ExperimentKind::FairCoin => run_fair_coin(spec),
        ExperimentKind::Gradcheck => run_gradcheck(spec),
        _ => run_detection(spec),
    })
}

/// Runs `spec` and writes its artifacts into `out_dir`:
/// `summary.json`, `summary.csv`, `trials.csv`, `traces/` and
/// `trace_plot.csv`.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path, jobs: Option<usize>) -> Result<SummaryTable> {
    let output = run(spec, jobs)?;
    write_artifacts(&output, out_dir)?;
    Ok(output.summary)
}

pub fn write_artifacts(output: &ExperimentOutput, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_file(&out_dir.join("summary.json"), output.summary.to_json()?.as_bytes())?;
    write_file(&out_dir.join("summary.csv"), output.summary.to_csv().as_bytes())?;
    if output.summary.spec.name.runs_detectors() {
        write_file(&out_dir.join("trials.csv"), trials_csv(&output.trials).as_bytes())?;
    }
    if output.traces.is_empty() {
        return Ok(());
    }
    let trace_dir = out_dir.join("traces");
    fs::create_dir_all(&trace_dir).map_err(|e| Error::io(&trace_dir, e))?;
    for (trial, reports) in &output.traces {
        for report in reports {
            let path = trace_dir.join(format!("trial{trial:04}_{}.csv", report.variant));
            let mut buf = Vec::new();
            report.write_trace_csv(&mut buf).map_err(|e| Error::io(&path, e))?;
            write_file(&path, &buf)?;
        }
    }
    let (_, first) = &output.traces[0];
    if !first.is_empty() {
        let header = format!("# {VERSION}\n");
        let body = emit_trace_plot_data(first)?;
        write_file(&out_dir.join("trace_plot.csv"), format!("{header}{body}").as_bytes())?;
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn trials_csv(trials: &[TrialOutcome]) -> String {
    fn opt(v: Option<u64>) -> String {
        v.map_or_else(String::new, |x| x.to_string())
    }
    let mut out = String::from(
        "trial,variant,generator_seed,detector_seed,steps,discovery_step,discovery_episode,false_negative,recycled_from,error\n",
    );
    for t in trials {
        let error = t.error.as_deref().unwrap_or("").replace(['\n', ','], " ");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            t.trial,
            t.variant,
            t.seeds.generator,
            t.seeds.detector,
            t.steps,
            opt(t.discovery_step),
            opt(t.discovery_episode),
            u8::from(t.false_negative),
            opt(t.recycled_from),
            error
        ));
    }
    out
}

struct TrialRun {
    outcomes: Vec<TrialOutcome>,
    trace: Option<Vec<DetectionReport>>,
}

fn run_detection(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let shifted = spec.generator.schedule.is_shifted();
    let runs: Vec<TrialRun> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| detection_trial(spec, trial, shifted))
        .collect();

    let mut trials = Vec::new();
    let mut traces = Vec::new();
    for (i, run) in runs.into_iter().enumerate() {
        trials.extend(run.outcomes);
        if let Some(reports) = run.trace {
            traces.push((i as u64, reports));
        }
    }
    let rows: Vec<VariantRow> = spec.variants.iter().map(|&v| variant_row(v, &trials, shifted)).collect();
    let trial_errors = trials
        .iter()
        .filter_map(|t| t.error.as_ref().map(|e| (t.trial, format!("{}: {e}", t.variant))))
        .collect();
    let (measurements, checks) = detection_checks(spec, &rows, &trials)?;
    Ok(ExperimentOutput {
        summary: SummaryTable {
            version: VERSION.to_string(),
            spec: spec.clone(),
            rows,
            measurements,
            checks,
            trial_errors,
        },
        trials,
        traces,
    })
}

fn detection_trial(spec: &ExperimentSpec, trial: u64, shifted: bool) -> TrialRun {
    let seeds = TrialSeeds::derive(spec.seed, trial);
    let traced = trial < spec.trace_trials;
    let failed = |variant: Variant, e: String| TrialOutcome {
        trial,
        variant,
        seeds,
        steps: 0,
        discovery_step: None,
        discovery_episode: None,
        false_negative: shifted,
        recycled_from: None,
        error: Some(e),
    };
    let generator = spec.generator.with_seed(seeds.generator);
    let data = generate_range(&generator, 0, spec.train_episodes).and_then(|train| {
        let test = generate_range(&generator, spec.train_episodes as u64, spec.horizon as usize)?;
        Ok((train, test))
    });
    let (train, test) = match data {
        Ok(d) => d,
        Err(e) => {
            let msg = e.to_string();
            return TrialRun {
                outcomes: spec
                    .variants
                    .iter()
                    .map(|&v| failed(v, msg.clone()))
                    .collect(),
                trace: None,
            };
        }
    };
    let config = spec.detector.with_seed(seeds.detector);
    let options = RunOptions {
        horizon: spec.horizon,
        shifted,
        stop_on_alert: spec.stop_on_alert && !traced,
    };
    let mut outcomes = Vec::with_capacity(spec.variants.len());
    let mut reports = Vec::new();
    for &variant in &spec.variants {
        let result = if spec.name == ExperimentKind::MartingaleDoob {
            ShiftDetector::fit_with_model(&train, &config, Box::new(ConstantClassifier))
        } else {
            ShiftDetector::fit(variant, &train, &config)
        }
        .and_then(|mut det| run_deployment(&mut det, &test, options));
        match result {
            Ok(report) => {
                outcomes.push(TrialOutcome {
                    trial,
                    variant,
                    seeds,
                    steps: report.steps,
                    discovery_step: report.discovery_step,
                    discovery_episode: report.discovery_episode,
                    false_negative: report.false_negative,
                    recycled_from: report.recycled_from,
                    error: None,
                });
                if traced {
                    reports.push(report);
                }
            }
            Err(e) => outcomes.push(failed(variant, e.to_string())),
        }
    }
    TrialRun {
        outcomes,
        trace: traced.then_some(reports),
    }
}

fn variant_row(variant: Variant, trials: &[TrialOutcome], shifted: bool) -> VariantRow {
    let mine: Vec<&TrialOutcome> = trials.iter().filter(|t| t.variant == variant).collect();
    let n = mine.len() as u64;
    let discoveries: Vec<Option<u64>> = mine.iter().map(|t| t.discovery_step).collect();
    let alerts = discoveries.iter().flatten().count() as u64;
    let rate = |k: u64| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let fnr = shifted.then(|| rate(n - alerts));
    let failure = fnr.is_some_and(|f| f >= FAILURE_FNR);
    let mean = (shifted && !failure && alerts > 0)
        .then(|| discoveries.iter().flatten().map(|&s| s as f64).sum::<f64>() / alerts as f64);
    VariantRow {
        variant,
        trials: n,
        alerts,
        mean_discovery: mean,
        median_discovery: if shifted { censored_median(&discoveries) } else { None },
        false_negative_rate: fnr,
        false_positive_rate: (!shifted).then(|| rate(alerts)),
        failure,
        recycled_trials: mine.iter().filter(|t| t.recycled_from.is_some()).count() as u64,
        failed_trials: mine.iter().filter(|t| t.error.is_some()).count() as u64,
    }
}

fn detection_checks(
    spec: &ExperimentSpec,
    rows: &[VariantRow],
    trials: &[TrialOutcome],
) -> Result<(Vec<Measurement>, Vec<Check>)> {
    let epsilon = spec.detector.epsilon();
    let mut measurements = Vec::new();
    let mut checks = Vec::new();
    match spec.name {
        ExperimentKind::FprNull => {
            for r in rows {
                let p = binomial_two_sided_p(r.alerts, r.trials, epsilon);
                let fraction = r.alerts as f64 / r.trials as f64;
                measurements.push(Measurement {
                    name: format!("{}_binomial_p", r.variant),
                    value: p,
                });
                checks.push(Check {
                    name: format!("{}_fpr_within_bound", r.variant),
                    passed: fraction <= epsilon || p >= 0.01,
                    detail: format!(
                        "{}/{} alerts (fraction {fraction}); two-sided binomial p vs {epsilon} = {p:.6}",
                        r.alerts, r.trials
                    ),
                });
            }
        }
        ExperimentKind::MartingaleDoob => {
            let r = &rows[0];
            let n = r.trials as f64;
            let bound = epsilon + 3.0 * (epsilon * (1.0 - epsilon) / n).sqrt();
            let fraction = r.alerts as f64 / n;
            measurements.push(Measurement {
                name: "alert_fraction_bound".into(),
                value: bound,
            });
            checks.push(Check {
                name: "doob_alert_fraction".into(),
                passed: fraction <= bound,
                detail: format!("{}/{} alerts (fraction {fraction}) vs bound {bound:.6}", r.alerts, r.trials),
            });
        }
        ExperimentKind::DetectionOrdering => {
            let order: Vec<&VariantRow> = [Variant::Ours, Variant::CmFv, Variant::Cm]
                .iter()
                .filter_map(|v| rows.iter().find(|r| r.variant == *v))
                .collect();
            let key = |r: &VariantRow| r.median_discovery.unwrap_or(f64::INFINITY);
            let ordered = order.windows(2).all(|w| key(w[0]) < key(w[1]));
            let fmt = |r: &VariantRow| {
                format!(
                    "{}={}",
                    r.variant,
                    r.median_discovery.map_or_else(|| "censored".to_string(), |m| m.to_string())
                )
            };
            checks.push(Check {
                name: "median_ordering".into(),
                passed: ordered,
                detail: order.iter().map(|r| fmt(r)).collect::<Vec<_>>().join(" < "),
            });
            let ours = rows.iter().find(|r| r.variant == Variant::Ours).expect("validated");
            checks.push(Check {
                name: "ours_no_false_negatives".into(),
                passed: ours.false_negative_rate == Some(0.0),
                detail: format!("ours FNR {:?} at horizon {}", ours.false_negative_rate, spec.horizon),
            });
        }
        ExperimentKind::AlertBeforeFailure => {
            let failure_episode = failure_step(
                &spec.generator,
                spec.failure_floor,
                spec.train_episodes as u64 + spec.horizon,
            )?
            .ok_or_else(|| Error::Config(format!("proxy never reaches the floor {} within the horizon", spec.failure_floor)))?;
            if failure_episode < spec.train_episodes as u64 {
                return Err(Error::Config("failure occurs inside the training range".into()));
            }
            // Deployment step s observes episode train + s - 1; alerting at a
            // step strictly below the failure's offset is strictly earlier.
            let failure_offset = failure_episode - spec.train_episodes as u64;
            measurements.push(Measurement {
                name: "failure_episode".into(),
                value: failure_episode as f64,
            });
            measurements.push(Measurement {
                name: "failure_deployment_step".into(),
                value: failure_offset as f64,
            });
            for &variant in &spec.variants {
                let mine: Vec<&TrialOutcome> = trials.iter().filter(|t| t.variant == variant).collect();
                let early = mine
                    .iter()
                    .filter(|t| t.discovery_step.is_some_and(|s| s < failure_offset))
                    .count();
                let fraction = early as f64 / mine.len() as f64;
                measurements.push(Measurement {
                    name: format!("{variant}_alert_before_failure_fraction"),
                    value: fraction,
                });
                if variant == Variant::Ours {
                    checks.push(Check {
                        name: "ours_alerts_before_failure".into(),
                        passed: fraction >= spec.min_success_fraction,
                        detail: format!(
                            "{early}/{} trials alerted before deployment step {failure_offset} (need {})",
                            mine.len(),
                            spec.min_success_fraction
                        ),
                    });
                }
            }
        }
        ExperimentKind::FairCoin | ExperimentKind::Gradcheck => unreachable!("not a detection experiment"),
    }
    Ok((measurements, checks))
}

fn finished(spec: &ExperimentSpec, measurements: Vec<Measurement>, checks: Vec<Check>) -> ExperimentOutput {
    ExperimentOutput {
        summary: SummaryTable {
            version: VERSION.to_string(),
            spec: spec.clone(),
            rows: Vec::new(),
            measurements,
            checks,
            trial_errors: Vec::new(),
        },
        trials: Vec::new(),
        traces: Vec::new(),
    }
}

/// Names of the three classifiers used by the fair-coin experiment.
pub const FAIR_COIN_CLASSIFIERS: [&str; 3] = ["constant", "untrained", "trained_on_drift"];

fn fair_coin_models(spec: &ExperimentSpec, root: &Rng) -> Result<Vec<Box<dyn RecencyModel>>> {
    let dim = spec.generator.feature_dim();
    let config = spec.detector.classifier.clone();
    let untrained = RecencyClassifier::new(dim, config.clone(), &mut root.split("untrained"))?;

    // A network with a real recency signal, learned on a drifting stream that
    // shares nothing with the evaluation pairs.
    let drift = GeneratorSpec {
        schedule: ShiftSchedule::gradual(0, 0.02),
        seed: root.split("drift-data").derive_seed(),
        ..spec.generator.clone()
    };
    let d_orig = generate_range(&drift, 0, spec.train_episodes.max(30))?;
    let split = make_split(&d_orig, config.fractions, &mut root.split(tags::SPLIT))?;
    let mut trained = RecencyClassifier::new(dim, config, &mut root.split(tags::INIT))?;
    trained.train_initial(&split, &mut root.split(tags::TRAIN))?;

    Ok(vec![Box::new(ConstantClassifier), Box::new(untrained), Box::new(trained)])
}

fn run_fair_coin(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let per_trial: Vec<Result<Vec<f64>>> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let root = Rng::from_seed(spec.seed).split(tags::TRIAL).split_index(trial);
            let mut models = fair_coin_models(spec, &root)?;
            let mut accuracies = Vec::with_capacity(models.len());
            for (m, model) in models.iter_mut().enumerate() {
                let name = FAIR_COIN_CLASSIFIERS[m];
                let data = spec.generator.with_seed(root.split(name).split("pairs-data").derive_seed());
                let episodes = generate_range(&data, 0, 2 * spec.pairs)?;
                let mut bits = root.split(name).split(tags::PAIRS);
                let pairs: Vec<PairExample> = episodes
                    .chunks_exact(2)
                    .map(|p| PairExample::arrange(&p[0], &p[1], u8::from(rand::Rng::random_bool(&mut bits, 0.5))))
                    .collect();
                accuracies.push(pair_accuracy(model.as_mut(), &pairs)?);
            }
            Ok(accuracies)
        })
        .collect();

    let mut measurements = Vec::new();
    let mut checks = Vec::new();
    for (trial, result) in per_trial.into_iter().enumerate() {
        for (m, accuracy) in result?.into_iter().enumerate() {
            let name = FAIR_COIN_CLASSIFIERS[m];
            let label = if spec.trials == 1 { name.to_string() } else { format!("trial{trial}_{name}") };
            measurements.push(Measurement {
                name: format!("{label}_accuracy"),
                value: accuracy,
            });
            checks.push(Check {
                name: format!("{label}_near_half"),
                passed: (accuracy - 0.5).abs() <= spec.accuracy_tolerance,
                detail: format!("accuracy {accuracy} over {} pairs, allowed 0.5 ± {}", spec.pairs, spec.accuracy_tolerance),
            });
        }
    }
    Ok(finished(spec, measurements, checks))
}

fn run_gradcheck(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let reports: Vec<Result<f64>> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = TrialSeeds::derive(spec.seed, trial).detector;
            Ok(random_check(&spec.gradcheck_dims, spec.gradcheck_batch, seed)?.max_relative_error)
        })
        .collect();
    let errors = reports.into_iter().collect::<Result<Vec<f64>>>()?;
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let measurements = errors
        .iter()
        .enumerate()
        .map(|(i, &e)| Measurement {
            name: format!("trial{i}_max_relative_error"),
            value: e,
        })
        .collect();
    let checks = vec![Check {
        name: "max_relative_error".into(),
        passed: worst < spec.gradcheck_tolerance,
        detail: format!(
            "worst {worst:.3e} over {} networks of widths {:?}, bound {}",
            spec.trials, spec.gradcheck_dims, spec.gradcheck_tolerance
        ),
    }];
    Ok(finished(spec, measurements, checks))
}
