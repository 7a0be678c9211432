//! Zero-order Fourier–Bessel series expansion (FBSE) of a finite window.
//!
//! A window `y[0..U)` is expanded on the basis `J0(beta_m n / U)`, `m = 1..=U`,
//! where `beta_m` is the `m`-th positive zero of `J0`. Order `m` corresponds to
//! the physical frequency `m fs / (2U)`.
//!
//! Two analysis routes are provided:
//!
//! * [`FbseAnalysis::Quadrature`] evaluates the closed-form coefficient sum
//!   `C_m = 2 / (U^2 J1(beta_m)^2) * sum_n n y[n] J0(beta_m n / U)`. It is the
//!   discretised orthogonality relation and is only approximately inverted by
//!   the synthesis sum; `y[0]` carries zero weight.
//! * [`FbseAnalysis::Exact`] solves the synthesis system so that
//!   [`fbse_inverse`] reproduces the window to rounding error. On smooth
//!   signals the two routes agree to within a few percent.
//!
//! Basis tables are built once per window length and shared.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector, LU};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bessel::{bessel_j0, bessel_j1, BesselRoots};

/// Longest window accepted; the basis table is `U x U` doubles.
pub const MAX_WINDOW_LEN: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FbseError {
    #[error("window contains non-finite samples")]
    NonFiniteInput,
    #[error("window length {0} is below the minimum of 2")]
    TooShort(usize),
    #[error("window length {len} exceeds the supported maximum of {max}")]
    TooLong { len: usize, max: usize },
    #[error("sampling rate must be positive and finite, got {0}")]
    InvalidSampleRate(f64),
    #[error("order {order} outside 1..={len}")]
    OrderOutOfRange { order: usize, len: usize },
    #[error("frequency {0} Hz cannot be mapped to an order")]
    InvalidFrequency(f64),
    #[error("synthesis matrix is singular for length {0}")]
    Singular(usize),
}

pub type Result<T> = std::result::Result<T, FbseError>;

/// How coefficients are obtained from samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FbseAnalysis {
    /// Closed-form weighted sum.
    Quadrature,
    /// Least-error inverse of the synthesis sum.
    #[default]
    Exact,
}

/// Precomputed roots, basis samples and normalisation for one window length.
pub struct FbseBasis {
    len: usize,
    roots: BesselRoots,
    /// `synthesis[(n, m-1)] = J0(beta_m n / U)`.
    synthesis: DMatrix<f64>,
    /// `2 / (U^2 J1(beta_m)^2)`.
    norms: Vec<f64>,
    lu: OnceLock<Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>>,
}

impl std::fmt::Debug for FbseBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbseBasis").field("len", &self.len).finish_non_exhaustive()
    }
}

impl FbseBasis {
    pub fn new(len: usize) -> Result<Self> {
        if len < 2 {
            return Err(FbseError::TooShort(len));
        }
        if len > MAX_WINDOW_LEN {
            return Err(FbseError::TooLong { len, max: MAX_WINDOW_LEN });
        }
        let roots = BesselRoots::j0(len);
        let u = len as f64;
        let columns: Vec<Vec<f64>> = roots
            .as_slice()
            .par_iter()
            .map(|&beta| (0..len).map(|n| bessel_j0(beta * n as f64 / u)).collect())
            .collect();
        let synthesis = DMatrix::from_fn(len, len, |n, m| columns[m][n]);
        let norms = roots
            .as_slice()
            .iter()
            .map(|&beta| {
                let j1 = bessel_j1(beta);
                2.0 / (u * u * j1 * j1)
            })
            .collect();
        Ok(Self {
            len,
            roots,
            synthesis,
            norms,
            lu: OnceLock::new(),
        })
    }

    /// Shared basis for `len`, built on first use.
    pub fn shared(len: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<FbseBasis>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(b) = cache.lock().expect("basis cache poisoned").get(&len) {
            return Ok(Arc::clone(b));
        }
        // Built outside the lock; a concurrent duplicate build is harmless.
        let basis = Arc::new(Self::new(len)?);
        let mut guard = cache.lock().expect("basis cache poisoned");
        Ok(Arc::clone(guard.entry(len).or_insert(basis)))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn roots(&self) -> &BesselRoots {
        &self.roots
    }

    /// `J0(beta_m n / U)` for 1-based order `m`.
    pub fn basis_value(&self, n: usize, m: usize) -> f64 {
        self.synthesis[(n, m - 1)]
    }

    pub fn analyze(&self, window: &[f64], analysis: FbseAnalysis) -> Result<Vec<f64>> {
        assert_eq!(window.len(), self.len, "window length does not match basis");
        if window.iter().any(|v| !v.is_finite()) {
            return Err(FbseError::NonFiniteInput);
        }
        match analysis {
            FbseAnalysis::Quadrature => Ok(self.quadrature(window)),
            FbseAnalysis::Exact => self.solve(window),
        }
    }

    fn quadrature(&self, window: &[f64]) -> Vec<f64> {
        let weighted = DVector::from_iterator(
            self.len,
            window.iter().enumerate().map(|(n, &y)| n as f64 * y),
        );
        let sums = self.synthesis.tr_mul(&weighted);
        sums.iter().zip(&self.norms).map(|(s, k)| s * k).collect()
    }

    fn solve(&self, window: &[f64]) -> Result<Vec<f64>> {
        let lu = self
            .lu
            .get_or_init(|| {
                let lu = self.synthesis.clone().lu();
                lu.is_invertible().then_some(lu)
            })
            .as_ref()
            .ok_or(FbseError::Singular(self.len))?;
        let rhs = DVector::from_column_slice(window);
        let coeffs = lu.solve(&rhs).ok_or(FbseError::Singular(self.len))?;
        Ok(coeffs.iter().copied().collect())
    }

    /// `sum_m coeffs[m-1] J0(beta_m n / U)`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.len, "coefficient count does not match basis");
        let c = DVector::from_column_slice(coeffs);
        (&self.synthesis * c).iter().copied().collect()
    }

    /// Like [`synthesize`](Self::synthesize) but only over 0-based coefficient
    /// indices in `band`; `coeffs` is still the full length-`U` vector.
    pub fn synthesize_band(&self, coeffs: &[f64], band: std::ops::Range<usize>) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.len, "coefficient count does not match basis");
        assert!(band.end <= self.len, "band exceeds basis");
        if band.is_empty() {
            return vec![0.0; self.len];
        }
        let c = DVector::from_column_slice(&coeffs[band.clone()]);
        let cols = self.synthesis.columns(band.start, band.len());
        (cols * c).iter().copied().collect()
    }
}

/// FBSE coefficients `C_1..C_U` of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct FbseSpectrum {
    coeffs: Vec<f64>,
    fs: f64,
}

impl FbseSpectrum {
    pub fn new(coeffs: Vec<f64>, fs: f64) -> Result<Self> {
        check_fs(fs)?;
        if coeffs.len() < 2 {
            return Err(FbseError::TooShort(coeffs.len()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(FbseError::NonFiniteInput);
        }
        Ok(Self { coeffs, fs })
    }

    /// `C_m` is at index `m - 1`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.abs()).collect()
    }

    /// 1-based order of the largest `|C_m|`; the lowest order wins ties.
    pub fn peak_order(&self) -> usize {
        let mut best = 0;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.abs() > self.coeffs[best].abs() {
                best = i;
            }
        }
        best + 1
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let u = self.len() as f64;
        (1..=self.len()).map(|m| m as f64 * self.fs / (2.0 * u)).collect()
    }
}

fn check_fs(fs: f64) -> Result<()> {
    if fs.is_finite() && fs > 0.0 {
        Ok(())
    } else {
        Err(FbseError::InvalidSampleRate(fs))
    }
}

pub fn fbse_forward(window: &[f64], fs: f64, analysis: FbseAnalysis) -> Result<FbseSpectrum> {
    check_fs(fs)?;
    let basis = FbseBasis::shared(window.len())?;
    let coeffs = basis.analyze(window, analysis)?;
    FbseSpectrum::new(coeffs, fs)
}

pub fn fbse_inverse(spectrum: &FbseSpectrum) -> Result<Vec<f64>> {
    let basis = FbseBasis::shared(spectrum.len())?;
    Ok(basis.synthesize(spectrum.coeffs()))
}

/// `f_m = m fs / (2U)`.
pub fn order_to_freq(order: usize, len: usize, fs: f64) -> Result<f64> {
    check_fs(fs)?;
    if order == 0 || order > len {
        return Err(FbseError::OrderOutOfRange { order, len });
    }
    Ok(order as f64 * fs / (2.0 * len as f64))
}

/// Nearest valid order for `freq`, clamped to `1..=len`.
pub fn freq_to_order(freq: f64, len: usize, fs: f64) -> Result<usize> {
    check_fs(fs)?;
    if !freq.is_finite() || freq < 0.0 {
        return Err(FbseError::InvalidFrequency(freq));
    }
    if len == 0 {
        return Err(FbseError::OrderOutOfRange { order: 0, len });
    }
    let m = (2.0 * freq * len as f64 / fs).round();
    Ok((m as usize).clamp(1, len))
}
