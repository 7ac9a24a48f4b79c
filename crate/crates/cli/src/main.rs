//! `driftgale` command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 when an experiment
//! or gradient check ran but its assertions failed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use driftgale::config::DetectorConfig;
use driftgale::datagen::{generate_range, GeneratorSpec};
use driftgale::detector::{run_stream, RunOptions, ShiftDetector, Variant, DEFAULT_HORIZON};
use driftgale::harness::{run_experiment, ExperimentSpec};
use driftgale::nn::gradcheck::random_check;
use driftgale::{load_stream, write_episodes, StreamFormat, StreamLabel};

const SEED_ENV: &str = "DRIFTGALE_SEED";

#[derive(Debug, Parser)]
#[command(name = "driftgale", version, about = "Online distribution-shift detection with exchangeability martingales")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic episode stream from a generator spec (JSON).
    Simulate {
        /// Generator spec file.
        #[arg(long)]
        spec: PathBuf,
        /// Output file; `.csv` writes CSV, anything else JSONL.
        #[arg(long)]
        out: PathBuf,
        /// Number of episodes to write.
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// Id of the first episode.
        #[arg(long, default_value_t = 0)]
        start: u64,
        /// Overrides the spec's seed.
        #[arg(long, env = SEED_ENV)]
        seed: Option<u64>,
    },
    /// Fit a detector on training episodes and run it over a test stream.
    Detect {
        /// ours, cm or cm-fv.
        #[arg(long, default_value = "ours")]
        variant: Variant,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Alert threshold C (false-alarm bound 1/C).
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, env = SEED_ENV)]
        seed: Option<u64>,
        /// Detector config file (JSON); flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        horizon: u64,
        /// Mark the test stream as shifted so a missed alert counts as a false negative.
        #[arg(long)]
        shifted: bool,
        /// Write the JSON summary here instead of stdout.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Write the per-step trace CSV here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run an experiment spec (JSON) and write its artifacts.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Overrides the spec's master seed.
        #[arg(long, env = SEED_ENV)]
        seed: Option<u64>,
        /// Overrides the spec's trial count.
        #[arg(long)]
        trials: Option<u64>,
        /// Exit with status 2 if any of the experiment's checks fail.
        #[arg(long)]
        check: bool,
    },
    /// Compare analytic and finite-difference gradients on a random MLP.
    Gradcheck {
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
        /// Layer widths, input first.
        #[arg(long, value_delimiter = ',', default_value = "10,12,8,6,1")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 6)]
        batch: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

enum Outcome {
    Ok,
    AssertionFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::AssertionFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(command: Command) -> Result<Outcome> {
    match command {
        Command::Simulate { spec, out, count, start, seed } => {
            let text = read(&spec)?;
            let mut generator: GeneratorSpec =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", spec.display()))?;
            if let Some(s) = seed {
                generator.seed = s;
            }
            let episodes = generate_range(&generator, start, count)?;
            write_episodes(&out, StreamFormat::from_path(&out), &episodes)?;
            eprintln!("wrote {} episodes to {}", episodes.len(), out.display());
            Ok(Outcome::Ok)
        }
        Command::Detect {
            variant,
            train,
            test,
            threshold,
            seed,
            config,
            horizon,
            shifted,
            summary,
            trace,
        } => {
            let mut cfg = match &config {
                Some(path) => serde_json::from_str::<DetectorConfig>(&read(path)?)
                    .with_context(|| format!("parsing {}", path.display()))?,
                None => DetectorConfig::default(),
            };
            if let Some(t) = threshold {
                cfg.threshold = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let d_orig = load_stream(&train, StreamFormat::from_path(&train), StreamLabel::Train)?.collect_episodes()?;
            let stream = load_stream(&test, StreamFormat::from_path(&test), StreamLabel::Test)?;
            let mut detector = ShiftDetector::fit(variant, &d_orig, &cfg)?;
            let options = RunOptions { horizon, shifted, stop_on_alert: false };
            let report = run_stream(&mut detector, stream, options)?;
            let json = report.summary_json()?;
            match summary {
                Some(path) => write(&path, json.as_bytes())?,
                None => println!("{json}"),
            }
            if let Some(path) = trace {
                let mut buf = Vec::new();
                report.write_trace_csv(&mut buf)?;
                write(&path, &buf)?;
            }
            Ok(Outcome::Ok)
        }
        Command::Experiment { spec, out_dir, jobs, seed, trials, check } => {
            let mut experiment = ExperimentSpec::load(&spec)?;
            if let Some(s) = seed {
                experiment.seed = s;
            }
            if let Some(t) = trials {
                experiment.trials = t;
            }
            let table = run_experiment(&experiment, &out_dir, jobs)?;
            print!("{}", table.to_csv());
            for c in &table.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            for (trial, message) in &table.trial_errors {
                println!("ERROR trial {trial}: {message}");
            }
            if check && !table.passed() {
                return Ok(Outcome::AssertionFailed);
            }
            Ok(Outcome::Ok)
        }
        Command::Gradcheck { seed, dims, batch, tolerance } => {
            if dims.len() < 2 {
                bail!("--dims needs at least an input and an output width");
            }
            let report = random_check(&dims, batch, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if report.max_relative_error < tolerance {
                Ok(Outcome::Ok)
            } else {
                eprintln!("max relative error {:e} exceeds {tolerance:e}", report.max_relative_error);
                Ok(Outcome::AssertionFailed)
            }
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}
