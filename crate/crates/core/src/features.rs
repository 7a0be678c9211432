//! Fixed-length per-window descriptors built from reconstructed modes.
//!
//! Each mode contributes the triple `(E, ln(E + eps), H)`: mean power, its
//! logarithm and the Shannon entropy (nats) of the mode's normalised energy
//! distribution over time. Slots for modes the decomposition did not produce
//! are padded with `(0, ln eps, 0)` so the vector length is always `3K`.

use thiserror::Error;

use crate::ewt::ModeSet;

pub const DEFAULT_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("mode set has {got} modes but only {max} feature slots")]
    TooManyModes { got: usize, max: usize },
}

/// `(1/W) sum_n mode[n]^2`.
pub fn mode_energy(mode: &[f64]) -> f64 {
    if mode.is_empty() {
        return 0.0;
    }
    mode.iter().map(|v| v * v).sum::<f64>() / mode.len() as f64
}

pub fn mode_log_energy(energy: f64, epsilon: f64) -> f64 {
    (energy + epsilon).ln()
}

/// Entropy of `p[n] = mode[n]^2 / sum mode^2`, with `0 ln 0 = 0`; zero for an all-zero mode.
pub fn mode_entropy(mode: &[f64]) -> f64 {
    let total: f64 = mode.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return 0.0;
    }
    let h: f64 = mode
        .iter()
        .map(|v| v * v / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    // Rounding can push a one-hot distribution a hair below zero.
    h.max(0.0)
}

/// `(E_1, logE_1, H_1, ..., E_K, logE_K, H_K)` in band order.
pub fn feature_vector(modes: &ModeSet, max_modes: usize, epsilon: f64) -> Result<Vec<f64>, FeatureError> {
    if modes.len() > max_modes {
        return Err(FeatureError::TooManyModes {
            got: modes.len(),
            max: max_modes,
        });
    }
    let mut out = Vec::with_capacity(3 * max_modes);
    for mode in modes.modes() {
        let e = mode_energy(mode);
        out.extend([e, mode_log_energy(e, epsilon), mode_entropy(mode)]);
    }
    for _ in modes.len()..max_modes {
        out.extend([0.0, epsilon.ln(), 0.0]);
    }
    Ok(out)
}

/// Column names `f_0 .. f_{3K-1}`.
pub fn feature_names(max_modes: usize) -> Vec<String> {
    (0..3 * max_modes).map(|i| format!("f_{i}")).collect()
}
