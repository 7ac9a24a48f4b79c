use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Points seen so far with their nearest-neighbour distances.
///
/// A point's score is its distance to the closest *other* point, so a lone
/// point scores `+inf`. Inserting `x` gives it `min_i d(x, p_i)` and lowers
/// every existing score to `min(α_i, d(x, p_i))`, which keeps the cache exact
/// in `O(n·d)` per insertion.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NonconformityBag {
    points: Vec<Vec<f64>>,
    scores: Vec<f64>,
}

impl NonconformityBag {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(points: impl IntoIterator<Item = Vec<f64>>) -> Result<Self> {
        let mut bag = Self::new();
        for p in points {
            bag.insert(p)?;
        }
        Ok(bag)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Vec::len)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        match self.dim() {
            Some(d) if d != x.len() => Err(Error::Dimension {
                expected: d,
                found: x.len(),
            }),
            _ => Ok(()),
        }
    }

    /// Adds `x` and returns its score.
    pub fn insert(&mut self, x: Vec<f64>) -> Result<f64> {
        self.check_dim(&x)?;
        let mut own = f64::INFINITY;
        for (p, s) in self.points.iter().zip(self.scores.iter_mut()) {
            let d = euclidean(p, &x);
            if d < *s {
                *s = d;
            }
            if d < own {
                own = d;
            }
        }
        self.points.push(x);
        self.scores.push(own);
        Ok(own)
    }

    /// `O(n²)` recomputation of every score, for checking the cache.
    pub fn recompute_scores(&self) -> Vec<f64> {
        (0..self.points.len())
            .map(|i| {
                self.points
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, q)| euclidean(&self.points[i], q))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}

/// Distance from `x` to its nearest point in `bag` (`x` is not inserted).
pub fn nonconformity(bag: &NonconformityBag, x: &[f64]) -> Result<f64> {
    if bag.is_empty() {
        return Err(Error::Empty("nonconformity bag"));
    }
    bag.check_dim(x)?;
    Ok(bag
        .points
        .iter()
        .map(|p| euclidean(p, x))
        .fold(f64::INFINITY, f64::min))
}
