//! Seeded episodic streams with controllable distribution shift.
//!
//! Episode `j` carries a shift magnitude
//!
//! ```text
//! δ_j = 0                  j < n₀
//!       rate · (j − n₀)    gradual_linear, j ≥ n₀
//!       rate               abrupt,         j ≥ n₀
//! ```
//!
//! and is drawn from a per-episode random stream keyed by `(seed, j)`, so
//! episodes before `n₀` are i.i.d. and any sub-range can be regenerated alone.
//!
//! Families:
//!
//! * `gaussian_mean_drift`: `x ~ N((μ₀ + δ_j)·1, σ²I)`.
//! * `synthetic_image_brightness`: a procedural runway scene,
//!   `x = g_j · max(0, 1 − δ_j) · scene + N(0, σ²)` with illumination
//!   `g_j = max(0, 1 + jitter · N(0, 1))`.
//! * `synthetic_image_warp`: the scene sampled through a rotation by `δ_j`
//!   radians about the image centre plus a horizontal offset of `δ_j / 2`.

use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::episode::Episode;
use crate::error::{Error, Result};
use crate::rng::{tags, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    None,
    GradualLinear,
    Abrupt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftSchedule {
    pub kind: ShiftKind,
    pub change_point: u64,
    pub rate: f64,
}

impl ShiftSchedule {
    pub fn none() -> Self {
        Self {
            kind: ShiftKind::None,
            change_point: 0,
            rate: 0.0,
        }
    }

    pub fn gradual(change_point: u64, rate: f64) -> Self {
        Self {
            kind: ShiftKind::GradualLinear,
            change_point,
            rate,
        }
    }

    pub fn abrupt(change_point: u64, rate: f64) -> Self {
        Self {
            kind: ShiftKind::Abrupt,
            change_point,
            rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rate.is_finite() {
            return Err(Error::Config(format!("shift rate must be finite, got {}", self.rate)));
        }
        if self.kind == ShiftKind::None && self.rate != 0.0 {
            return Err(Error::Config("a schedule of kind none must have rate 0".into()));
        }
        Ok(())
    }

    pub fn magnitude(&self, episode: u64) -> f64 {
        if episode < self.change_point {
            return 0.0;
        }
        match self.kind {
            ShiftKind::None => 0.0,
            ShiftKind::GradualLinear => self.rate * (episode - self.change_point) as f64,
            ShiftKind::Abrupt => self.rate,
        }
    }

    pub fn is_shifted(&self) -> bool {
        self.kind != ShiftKind::None && self.rate != 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    GaussianMeanDrift,
    SyntheticImageBrightness,
    SyntheticImageWarp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub family: Family,
    /// Feature dimension for the Gaussian family.
    pub dim: usize,
    /// `[height, width]` for the image families.
    pub image_shape: [usize; 2],
    pub base_mean: f64,
    pub noise_scale: f64,
    /// Standard deviation of the per-episode illumination factor around 1.
    pub illumination_jitter: f64,
    pub schedule: ShiftSchedule,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            family: Family::GaussianMeanDrift,
            dim: 8,
            image_shape: [16, 16],
            base_mean: 0.0,
            noise_scale: 1.0,
            illumination_jitter: 0.0,
            schedule: ShiftSchedule::none(),
            seed: 0,
        }
    }
}

impl GeneratorSpec {
    pub fn gaussian(dim: usize, noise_scale: f64, schedule: ShiftSchedule, seed: u64) -> Self {
        Self {
            family: Family::GaussianMeanDrift,
            dim,
            noise_scale,
            schedule,
            seed,
            ..Self::default()
        }
    }

    pub fn image(family: Family, noise_scale: f64, schedule: ShiftSchedule, seed: u64) -> Self {
        Self {
            family,
            noise_scale,
            schedule,
            seed,
            ..Self::default()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return Err(Error::Config("noise_scale must be nonnegative".into()));
        }
        if !(self.base_mean.is_finite()) {
            return Err(Error::Config("base_mean must be finite".into()));
        }
        if !(0.0..1.0).contains(&self.illumination_jitter) {
            return Err(Error::Config("illumination_jitter must lie in [0, 1)".into()));
        }
        match self.family {
            Family::GaussianMeanDrift if self.dim == 0 => {
                Err(Error::Config("dim must be positive".into()))
            }
            Family::SyntheticImageBrightness | Family::SyntheticImageWarp
                if self.image_shape.contains(&0) =>
            {
                Err(Error::Config("image dimensions must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self.family {
            Family::GaussianMeanDrift => self.dim,
            _ => self.image_shape[0] * self.image_shape[1],
        }
    }

    fn episode_rng(&self, id: u64) -> Rng {
        Rng::from_seed(self.seed).split(tags::DATAGEN).split_index(id)
    }
}

/// Episodes `0..count`.
pub fn generate(spec: &GeneratorSpec, count: usize) -> Result<Vec<Episode>> {
    generate_range(spec, 0, count)
}

/// Episodes `start..start + count`; identical to the same slice of a longer run.
pub fn generate_range(spec: &GeneratorSpec, start: u64, count: usize) -> Result<Vec<Episode>> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::Config("count must be at least 1".into()));
    }
    (start..start + count as u64).map(|j| episode(spec, j)).collect()
}

fn episode(spec: &GeneratorSpec, j: u64) -> Result<Episode> {
    let mut rng = spec.episode_rng(j);
    let delta = spec.schedule.magnitude(j);
    let noise = Normal::new(0.0, spec.noise_scale).map_err(|e| Error::Config(e.to_string()))?;
    match spec.family {
        Family::GaussianMeanDrift => {
            let mean = spec.base_mean + delta;
            let x = (0..spec.dim).map(|_| mean + noise.sample(&mut rng)).collect();
            Episode::new(j, x)
        }
        Family::SyntheticImageBrightness => {
            let gain = illumination(spec, &mut rng) * (1.0 - delta).max(0.0);
            let mut x = render(spec.image_shape, Warp::IDENTITY);
            x.iter_mut().for_each(|v| *v = gain * *v + noise.sample(&mut rng));
            Episode::with_shape(j, x, Some(spec.image_shape.to_vec()))
        }
        Family::SyntheticImageWarp => {
            let gain = illumination(spec, &mut rng);
            let mut x = render(spec.image_shape, Warp::from_magnitude(delta));
            x.iter_mut().for_each(|v| *v = gain * *v + noise.sample(&mut rng));
            Episode::with_shape(j, x, Some(spec.image_shape.to_vec()))
        }
    }
}

fn illumination(spec: &GeneratorSpec, rng: &mut Rng) -> f64 {
    // Always draw so that toggling jitter does not reshuffle the noise.
    let z: f64 = StandardNormal.sample(rng);
    (1.0 + spec.illumination_jitter * z).max(0.0)
}

// Scene geometry in unit coordinates; u runs left to right, v top to bottom.
const RUNWAY_LEFT: f64 = 0.3;
const RUNWAY_RIGHT: f64 = 0.7;
const RUNWAY_TOP: f64 = 0.25;
const RUNWAY_VALUE: f64 = 0.15;
const CENTERLINE_HALF_WIDTH: f64 = 0.04;
const CENTERLINE_VALUE: f64 = 0.9;
const SUPERSAMPLE: usize = 2;

fn in_runway(u: f64, v: f64) -> bool {
    (RUNWAY_LEFT..=RUNWAY_RIGHT).contains(&u) && v >= RUNWAY_TOP
}

fn in_centerline(u: f64, v: f64) -> bool {
    v >= RUNWAY_TOP && (u - 0.5).abs() < CENTERLINE_HALF_WIDTH
}

fn scene(u: f64, v: f64) -> f64 {
    if in_centerline(u, v) {
        CENTERLINE_VALUE
    } else if in_runway(u, v) {
        RUNWAY_VALUE
    } else {
        0.35 + 0.3 * (1.0 - v)
    }
}

#[derive(Debug, Clone, Copy)]
struct Warp {
    angle: f64,
    offset: f64,
}

impl Warp {
    const IDENTITY: Warp = Warp {
        angle: 0.0,
        offset: 0.0,
    };

    fn from_magnitude(delta: f64) -> Self {
        Self {
            angle: delta,
            offset: delta / 2.0,
        }
    }

    fn apply(&self, u: f64, v: f64) -> (f64, f64) {
        let (s, c) = self.angle.sin_cos();
        let (du, dv) = (u - 0.5, v - 0.5);
        (0.5 + c * du - s * dv - self.offset, 0.5 + s * du + c * dv)
    }
}

/// Noise-free scene, supersampled 2×2 per pixel, row-major.
fn render(shape: [usize; 2], warp: Warp) -> Vec<f64> {
    let [h, w] = shape;
    let ss = SUPERSAMPLE as f64;
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for sr in 0..SUPERSAMPLE {
                for sc in 0..SUPERSAMPLE {
                    let u = (c as f64 + (sc as f64 + 0.5) / ss) / w as f64;
                    let v = (r as f64 + (sr as f64 + 0.5) / ss) / h as f64;
                    let (u, v) = warp.apply(u, v);
                    acc += scene(u, v);
                }
            }
            out.push(acc / (ss * ss));
        }
    }
    out
}

/// Pixel masks used by the brightness failure proxy, by pixel centre.
fn contrast_masks(shape: [usize; 2]) -> (Vec<usize>, Vec<usize>) {
    let [h, w] = shape;
    let mut line = Vec::new();
    let mut runway = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let u = (c as f64 + 0.5) / w as f64;
            let v = (r as f64 + 0.5) / h as f64;
            if in_centerline(u, v) {
                line.push(r * w + c);
            } else if in_runway(u, v) {
                runway.push(r * w + c);
            }
        }
    }
    (line, runway)
}

fn centerline_contrast(x: &[f64], shape: [usize; 2]) -> f64 {
    let (line, runway) = contrast_masks(shape);
    let mean = |idx: &[usize]| idx.iter().map(|&i| x[i]).sum::<f64>() / idx.len() as f64;
    mean(&line) - mean(&runway)
}

/// Downstream-task degradation score for one episode.
///
/// * Brightness: centerline-minus-runway contrast relative to the unshifted,
///   noise-free scene, so 1 at full visibility and 0 when fully dark. Lower
///   is worse.
/// * Gaussian: distance of the mean estimate `x̄·1` from the origin,
///   `|x̄|·√d`. Higher is worse.
/// * Warp: unsupported.
pub fn failure_proxy(episode: &Episode, spec: &GeneratorSpec) -> Result<f64> {
    if episode.dim() != spec.feature_dim() {
        return Err(Error::Dimension {
            expected: spec.feature_dim(),
            found: episode.dim(),
        });
    }
    match spec.family {
        Family::SyntheticImageBrightness => {
            let base = centerline_contrast(&render(spec.image_shape, Warp::IDENTITY), spec.image_shape);
            if base <= 0.0 {
                return Err(Error::Config("image too small to resolve the centerline".into()));
            }
            Ok(centerline_contrast(&episode.features, spec.image_shape) / base)
        }
        Family::GaussianMeanDrift => {
            let d = episode.dim() as f64;
            let mean = episode.features.iter().sum::<f64>() / d;
            Ok(mean.abs() * d.sqrt())
        }
        Family::SyntheticImageWarp => Err(Error::UnsupportedFamily("synthetic_image_warp")),
    }
}

/// Noise-free, jitter-free version of `spec`.
pub fn clean(spec: &GeneratorSpec) -> GeneratorSpec {
    GeneratorSpec {
        noise_scale: 0.0,
        illumination_jitter: 0.0,
        ..spec.clone()
    }
}

/// First episode index in `0..max_episode` whose noise-free brightness proxy
/// is at or below `floor`.
pub fn failure_step(spec: &GeneratorSpec, floor: f64, max_episode: u64) -> Result<Option<u64>> {
    if spec.family != Family::SyntheticImageBrightness {
        return Err(Error::UnsupportedFamily("failure floors apply to synthetic_image_brightness"));
    }
    let clean = clean(spec);
    for j in 0..max_episode {
        if failure_proxy(&episode(&clean, j)?, &clean)? <= floor + 1e-9 {
            return Ok(Some(j));
        }
    }
    Ok(None)
}
