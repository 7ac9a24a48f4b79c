//! Small hypothesis tests used by the statistical checks.

use rand::seq::SliceRandom;
use statrs::distribution::{Binomial, Discrete};

use crate::rng::Rng;

/// Two-sided exact binomial test p-value for `k` successes in `n` trials
/// under success probability `p`, summing every outcome no more likely than
/// the observed one.
pub fn binomial_two_sided_p(k: u64, n: u64, p: f64) -> f64 {
    let dist = Binomial::new(p, n).expect("valid binomial parameters");
    let observed = dist.pmf(k);
    let cutoff = observed * (1.0 + 1e-7);
    let total: f64 = (0..=n).map(|i| dist.pmf(i)).filter(|&m| m <= cutoff).sum();
    total.min(1.0)
}

/// One-sample Kolmogorov–Smirnov test against U(0, 1). Returns `(D, p)`.
pub fn ks_uniform(samples: &[f64]) -> (f64, f64) {
    assert!(!samples.is_empty(), "KS test needs samples");
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i as f64 + 1.0) / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let sqrt_n = n.sqrt();
    (d, kolmogorov_survival((sqrt_n + 0.12 + 0.11 / sqrt_n) * d))
}

/// `Pr[K > λ]` for the Kolmogorov distribution.
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let k = f64::from(k);
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u32 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Two-sample energy distance `2E|X−Y| − E|X−X'| − E|Y−Y'|` from a pairwise
/// distance matrix and a labelling.
fn energy_statistic(dist: &[Vec<f64>], in_first: &[bool]) -> f64 {
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    let (mut nxy, mut nxx, mut nyy) = (0usize, 0usize, 0usize);
    for i in 0..dist.len() {
        for j in (i + 1)..dist.len() {
            match (in_first[i], in_first[j]) {
                (true, true) => {
                    xx += dist[i][j];
                    nxx += 1;
                }
                (false, false) => {
                    yy += dist[i][j];
                    nyy += 1;
                }
                _ => {
                    xy += dist[i][j];
                    nxy += 1;
                }
            }
        }
    }
    2.0 * xy / nxy as f64 - xx / nxx.max(1) as f64 - yy / nyy.max(1) as f64
}

/// Permutation p-value of the energy-distance two-sample test.
pub fn energy_permutation_test(a: &[Vec<f64>], b: &[Vec<f64>], permutations: usize, rng: &mut Rng) -> f64 {
    let points: Vec<&Vec<f64>> = a.iter().chain(b).collect();
    let dist: Vec<Vec<f64>> = points
        .iter()
        .map(|p| points.iter().map(|q| euclidean(p, q)).collect())
        .collect();
    let mut labels: Vec<bool> = (0..points.len()).map(|i| i < a.len()).collect();
    let observed = energy_statistic(&dist, &labels);
    let mut at_least = 0usize;
    for _ in 0..permutations {
        labels.shuffle(rng);
        if energy_statistic(&dist, &labels) >= observed {
            at_least += 1;
        }
    }
    (at_least + 1) as f64 / (permutations + 1) as f64
}
