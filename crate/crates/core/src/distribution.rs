//! Probability vectors over the target classes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("distribution needs at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("component {index} is {value}; components must be finite and nonnegative")]
    BadComponent { index: usize, value: f64 },
    #[error("components sum to {0}, expected 1")]
    NotNormalized(f64),
}

/// Sum-to-one tolerance for validated distributions.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ClassDistribution(Vec<f64>);

impl ClassDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, DistributionError> {
        if probs.len() < 2 {
            return Err(DistributionError::TooFewClasses(probs.len()));
        }
        if let Some((index, &value)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(DistributionError::BadComponent { index, value });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(DistributionError::NotNormalized(sum));
        }
        Ok(Self(probs))
    }

    /// Rescales nonnegative weights to sum to one.
    pub fn normalized(weights: Vec<f64>) -> Result<Self, DistributionError> {
        let sum: f64 = weights.iter().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(DistributionError::NotNormalized(sum));
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(classes: usize) -> Self {
        assert!(classes >= 2);
        Self(vec![1.0 / classes as f64; classes])
    }

    pub fn one_hot(classes: usize, hot: usize) -> Self {
        assert!(classes >= 2 && hot < classes);
        let mut p = vec![0.0; classes];
        p[hot] = 1.0;
        Self(p)
    }

    /// Numerically stable softmax of raw scores.
    pub fn softmax(logits: &[f64]) -> Self {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        Self(exps.into_iter().map(|e| e / sum).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    /// Index of the largest probability; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

impl TryFrom<Vec<f64>> for ClassDistribution {
    type Error = DistributionError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ClassDistribution> for Vec<f64> {
    fn from(d: ClassDistribution) -> Self {
        d.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ClassDistribution::new(vec![0.2, 0.3, 0.5]).is_ok());
        assert!(matches!(
            ClassDistribution::new(vec![1.0]),
            Err(DistributionError::TooFewClasses(1))
        ));
        assert!(matches!(
            ClassDistribution::new(vec![-0.1, 1.1]),
            Err(DistributionError::BadComponent { index: 0, .. })
        ));
        assert!(matches!(
            ClassDistribution::new(vec![0.5, 0.6]),
            Err(DistributionError::NotNormalized(_))
        ));
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let d = ClassDistribution::softmax(&[0.0; 3]);
        assert_eq!(d, ClassDistribution::uniform(3));
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let a = ClassDistribution::softmax(&[1.0, -2.0, 0.5]);
        let b = ClassDistribution::softmax(&[101.0, 98.0, 100.5]);
        for (x, y) in a.probs().iter().zip(b.probs()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn serde_validates() {
        assert!(serde_json::from_str::<ClassDistribution>("[0.5,0.5]").is_ok());
        assert!(serde_json::from_str::<ClassDistribution>("[0.5,0.6]").is_err());
    }
}
