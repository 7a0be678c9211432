//! Empirical wavelet decomposition driven by the FBSE spectrum.
//!
//! The closed-form magnitude spectrum `|C_m|` is segmented at persistent scale-space
//! minima (kept by an Otsu split of their persistences), a Meyer-type tight
//! frame is built on the resulting bands, and each band is reconstructed as a
//! time-domain mode by filtering the coefficients and resynthesising.
//!
//! Each mode is the analysis-then-synthesis projection through its own filter,
//! so the coefficient weights are `response^2` and the modes of a window add
//! back up to the window. Filtering is applied to the exact coefficients;
//! segmentation uses the closed-form spectrum, which does not show the
//! high-order rise the exact route produces for windows that end away from zero.

mod filters;
mod otsu;
mod scale_space;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fbse::{FbseAnalysis, FbseBasis, FbseError, FbseSpectrum};

pub use filters::{build_filter_bank, meyer_beta, xi_bound, BoundarySet, FilterBank};
pub use otsu::{otsu_threshold, OtsuError};
pub use scale_space::{
    gaussian_smooth, local_minima, persistent_minima, PersistentMinimum, ScaleSpaceConfig,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EwtError {
    #[error("spectrum has {0} bins, need at least 8")]
    SpectrumTooShort(usize),
    #[error("window has {0} samples, need at least 8")]
    WindowTooShort(usize),
    #[error("max_modes must be at least 1")]
    InvalidMaxModes,
    #[error("transition width {xi} violates the tight-frame bound {bound}")]
    InvalidXi { xi: f64, bound: f64 },
    #[error("invalid boundaries: {0}")]
    InvalidBoundaries(String),
    #[error(transparent)]
    Fbse(#[from] FbseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EwtConfig {
    /// Upper bound on the number of modes `K`.
    pub max_modes: usize,
    pub scale_space: ScaleSpaceConfig,
    /// Spectrum whose magnitudes are segmented.
    pub segmentation: FbseAnalysis,
    /// Coefficients that are filtered and resynthesised into modes.
    pub reconstruction: FbseAnalysis,
    /// Subtract the window mean before the expansion.
    pub demean: bool,
}

impl Default for EwtConfig {
    fn default() -> Self {
        Self {
            max_modes: 5,
            scale_space: ScaleSpaceConfig::default(),
            segmentation: FbseAnalysis::Quadrature,
            reconstruction: FbseAnalysis::Exact,
            demean: true,
        }
    }
}

/// Picks band edges on a magnitude spectrum.
///
/// Minima whose persistence reaches the Otsu threshold are kept. When all
/// persistences are equal the Otsu split is undefined; those minima are kept
/// only if they survive at least half of the scales. At most `max_modes - 1`
/// edges are retained, preferring longer-lived then deeper minima.
pub fn detect_boundaries(
    magnitudes: &[f64],
    max_modes: usize,
    cfg: &ScaleSpaceConfig,
) -> Result<BoundarySet, EwtError> {
    let len = magnitudes.len();
    if len < 8 {
        return Err(EwtError::SpectrumTooShort(len));
    }
    if max_modes == 0 {
        return Err(EwtError::InvalidMaxModes);
    }
    let minima = persistent_minima(magnitudes, cfg);
    let persistences: Vec<u32> = minima.iter().map(|m| m.persistence).collect();
    let mut kept: Vec<PersistentMinimum> = match otsu_threshold(&persistences) {
        Ok(t) => minima.into_iter().filter(|m| m.persistence >= t).collect(),
        Err(_) => {
            let long_lived = minima
                .first()
                .is_some_and(|m| 2 * m.persistence as usize >= cfg.scales);
            if long_lived {
                minima
            } else {
                Vec::new()
            }
        }
    };

    kept.sort_by(|a, b| {
        b.persistence
            .cmp(&a.persistence)
            .then(a.depth.total_cmp(&b.depth))
            .then(a.index.cmp(&b.index))
    });
    kept.truncate(max_modes - 1);
    kept.sort_by_key(|m| m.index);

    // Spectrum index i holds order m = i + 1, at w = pi m / U.
    let interior: Vec<f64> = kept
        .iter()
        .map(|m| PI * (m.index + 1) as f64 / len as f64)
        .collect();
    if interior.is_empty() {
        return Ok(BoundarySet::single());
    }
    BoundarySet::with_auto_xi(&interior)
}

/// Reconstructed modes of one window, ordered by ascending band.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    modes: Vec<Vec<f64>>,
    boundaries: BoundarySet,
}

impl ModeSet {
    pub fn new(modes: Vec<Vec<f64>>, boundaries: BoundarySet) -> Self {
        Self { modes, boundaries }
    }

    pub fn modes(&self) -> &[Vec<f64>] {
        &self.modes
    }

    pub fn boundaries(&self) -> &BoundarySet {
        &self.boundaries
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Sample-wise sum of all modes.
    pub fn sum(&self) -> Vec<f64> {
        let w = self.modes.first().map_or(0, Vec::len);
        (0..w).map(|n| self.modes.iter().map(|m| m[n]).sum()).collect()
    }
}

/// Projects `spectrum` through every filter of `bank` and resynthesises each band.
pub fn apply_filter_bank(spectrum: &FbseSpectrum, bank: &FilterBank) -> Result<Vec<Vec<f64>>, EwtError> {
    let basis = FbseBasis::shared(spectrum.len())?;
    Ok(bank
        .responses()
        .iter()
        .map(|resp| {
            let filtered: Vec<f64> = spectrum
                .coeffs()
                .iter()
                .zip(resp)
                .map(|(c, h)| c * h * h)
                .collect();
            let lo = resp.iter().position(|&h| h != 0.0).unwrap_or(0);
            let hi = resp.iter().rposition(|&h| h != 0.0).map_or(0, |i| i + 1);
            basis.synthesize_band(&filtered, lo..hi.max(lo))
        })
        .collect())
}

/// The demeaned copy of a window, or the window itself when `demean` is off.
pub fn prepare_window(window: &[f64], demean: bool) -> Vec<f64> {
    if !demean || window.is_empty() {
        return window.to_vec();
    }
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    window.iter().map(|v| v - mean).collect()
}

/// Full FBSE–EWT of one window.
pub fn decompose(window: &[f64], fs: f64, cfg: &EwtConfig) -> Result<ModeSet, EwtError> {
    if window.len() < 8 {
        return Err(EwtError::WindowTooShort(window.len()));
    }
    let prepared = prepare_window(window, cfg.demean);
    let spectrum = crate::fbse::fbse_forward(&prepared, fs, cfg.reconstruction)?;
    let magnitudes = if cfg.segmentation == cfg.reconstruction {
        spectrum.magnitudes()
    } else {
        crate::fbse::fbse_forward(&prepared, fs, cfg.segmentation)?.magnitudes()
    };
    let boundaries = detect_boundaries(&magnitudes, cfg.max_modes, &cfg.scale_space)?;
    let bank = build_filter_bank(&boundaries, spectrum.len())?;
    let modes = apply_filter_bank(&spectrum, &bank)?;
    Ok(ModeSet::new(modes, boundaries))
}
