//! Classification scores.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("no predictions to score")]
    EmptyInput,
    #[error("{predictions} predictions but {truths} truths")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("class index {0} out of range")]
    ClassOutOfRange(usize),
}

fn check(predictions: &[usize], truths: &[usize], classes: usize) -> Result<(), MetricError> {
    if predictions.len() != truths.len() {
        return Err(MetricError::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    if let Some(&c) = predictions.iter().chain(truths).find(|&&c| c >= classes) {
        return Err(MetricError::ClassOutOfRange(c));
    }
    Ok(())
}

/// `matrix[truth][prediction]` counts.
pub fn confusion_matrix(predictions: &[usize], truths: &[usize], classes: usize) -> Result<Vec<Vec<usize>>, MetricError> {
    check(predictions, truths, classes)?;
    let mut m = vec![vec![0; classes]; classes];
    for (&p, &t) in predictions.iter().zip(truths) {
        m[t][p] += 1;
    }
    Ok(m)
}

pub fn accuracy(predictions: &[usize], truths: &[usize]) -> Result<f64, MetricError> {
    if predictions.len() != truths.len() {
        return Err(MetricError::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let hits = predictions.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Unweighted mean of per-class F1 over all `classes`.
///
/// A class with no true positives scores 0, including a class that appears in
/// neither the predictions nor the truths.
pub fn macro_f1(predictions: &[usize], truths: &[usize], classes: usize) -> Result<f64, MetricError> {
    let m = confusion_matrix(predictions, truths, classes)?;
    let total: f64 = (0..classes)
        .map(|c| {
            let tp = m[c][c] as f64;
            let predicted: usize = (0..classes).map(|t| m[t][c]).sum();
            let actual: usize = m[c].iter().sum();
            if tp == 0.0 {
                return 0.0;
            }
            let precision = tp / predicted as f64;
            let recall = tp / actual as f64;
            2.0 * precision * recall / (precision + recall)
        })
        .sum();
    Ok(total / classes as f64)
}
