use crate::error::{Error, Result};

/// Smoothed conformal p-value of the last score among `scores`:
///
/// ```text
/// p_j = (#{i ≤ j : α_i > α_j} + θ · #{i ≤ j : α_i = α_j}) / j
/// ```
///
/// With `θ ~ U(0, 1]` independent of the data, `p_j` is exactly uniform under
/// exchangeability.
pub fn conformal_p(scores: &[f64], theta: f64) -> Result<f64> {
    let Some(&last) = scores.last() else {
        return Err(Error::Empty("score list"));
    };
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Config(format!("theta must lie in [0, 1], got {theta}")));
    }
    let mut greater = 0usize;
    let mut equal = 0usize;
    for &a in scores {
        if a > last {
            greater += 1;
        } else if a == last {
            equal += 1;
        }
    }
    Ok((greater as f64 + theta * equal as f64) / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_score_ties_with_itself() {
        assert_eq!(conformal_p(&[2.5], 0.5).unwrap(), 0.5);
    }

    #[test]
    fn extreme_ranks() {
        let mut largest: Vec<f64> = (1..=9).map(f64::from).collect();
        largest.push(100.0);
        assert!((conformal_p(&largest, 0.5).unwrap() - 0.05).abs() < 1e-15);
        let mut smallest: Vec<f64> = (1..=9).map(f64::from).collect();
        smallest.push(0.0);
        assert!((conformal_p(&smallest, 0.5).unwrap() - 0.95).abs() < 1e-15);
    }

    #[test]
    fn ties_are_split_by_theta() {
        let scores = [1.0, 3.0, 3.0, 0.5, 3.0];
        assert!((conformal_p(&scores, 0.25).unwrap() - 0.75 / 5.0).abs() < 1e-15);
        assert_eq!(conformal_p(&[f64::INFINITY, f64::INFINITY], 1.0).unwrap(), 1.0);
    }

    #[test]
    fn rejects_empty_and_bad_theta() {
        assert!(conformal_p(&[], 0.5).is_err());
        assert!(conformal_p(&[1.0], 1.5).is_err());
    }
}
