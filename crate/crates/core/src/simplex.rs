//! Points on the probability simplex.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deviation of the weight sum from one that is silently renormalized.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

/// A probability vector over a finite strategy set.
///
/// Weights are non-negative and sum to one. Inputs whose sum is off by less
/// than [`RENORMALIZE_TOLERANCE`] are renormalized; anything further away is
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexDistribution {
    weights: Vec<f64>,
}

impl SimplexDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let sum = Self::validate_weights(&weights)?;
        if (sum - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(Error::InvalidSimplex(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(Self::scaled(weights, sum))
    }

    /// Normalizes arbitrary non-negative weights with a positive sum.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let sum = Self::validate_weights(&weights)?;
        if sum <= 0.0 {
            return Err(Error::InvalidSimplex("weights sum to zero".into()));
        }
        Ok(Self::scaled(weights, sum))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "simplex dimension must be positive");
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// The pure strategy `index` out of `n`.
    pub fn vertex(n: usize, index: usize) -> Self {
        assert!(index < n, "vertex index out of range");
        let mut weights = vec![0.0; n];
        weights[index] = 1.0;
        Self { weights }
    }

    /// Two-strategy distribution `(p, 1 - p)`.
    pub fn binary(p: f64) -> Result<Self> {
        Self::new(vec![p, 1.0 - p])
    }

    fn validate_weights(weights: &[f64]) -> Result<f64> {
        if weights.is_empty() {
            return Err(Error::InvalidSimplex("no weights".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::InvalidSimplex(format!("weight {i} is not finite")));
            }
            if w < 0.0 {
                return Err(Error::InvalidSimplex(format!("weight {i} is negative ({w})")));
            }
        }
        Ok(weights.iter().sum())
    }

    fn scaled(mut weights: Vec<f64>, sum: f64) -> Self {
        if sum != 1.0 {
            weights.iter_mut().for_each(|w| *w /= sum);
        }
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// All weights strictly positive.
    pub fn is_interior(&self) -> bool {
        self.weights.iter().all(|&w| w > 0.0)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.weights
    }

    pub fn distance_inf(&self, other: &Self) -> f64 {
        max_abs_diff(&self.weights, &other.weights)
    }

    pub(crate) fn check_len(&self, expected: usize) -> Result<()> {
        if self.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.len(),
            });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for SimplexDistribution {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.weights[index]
    }
}

impl TryFrom<Vec<f64>> for SimplexDistribution {
    type Error = Error;

    fn try_from(weights: Vec<f64>) -> Result<Self> {
        Self::new(weights)
    }
}

impl From<SimplexDistribution> for Vec<f64> {
    fn from(x: SimplexDistribution) -> Self {
        x.weights
    }
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn renormalizes_small_drift() {
        let x = SimplexDistribution::new(vec![0.5, 0.5 + 5e-7]).unwrap();
        assert!((x.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_large_drift_and_negatives() {
        assert!(SimplexDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexDistribution::new(vec![1.1, -0.1]).is_err());
        assert!(SimplexDistribution::new(vec![f64::NAN, 1.0]).is_err());
        assert!(SimplexDistribution::new(vec![]).is_err());
    }

    #[test]
    fn serde_goes_through_validation() {
        let x: SimplexDistribution = serde_json::from_str("[0.25, 0.75]").unwrap();
        assert_eq!(x.weights(), &[0.25, 0.75]);
        assert!(serde_json::from_str::<SimplexDistribution>("[0.25, 0.25]").is_err());
    }

    proptest! {
        #[test]
        fn normalizing_preserves_sum_and_argmax(
            w in proptest::collection::vec(0.0f64..100.0, 1..12)
        ) {
            prop_assume!(w.iter().sum::<f64>() > 1e-9);
            let argmax = |v: &[f64]| {
                v.iter().enumerate().fold(0, |best, (i, &a)| if a > v[best] { i } else { best })
            };
            let x = SimplexDistribution::from_weights(w.clone()).unwrap();
            prop_assert!((x.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert_eq!(argmax(&w), argmax(x.weights()));
        }
    }
}
