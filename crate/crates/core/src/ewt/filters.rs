//! Meyer-type empirical scaling function and wavelets on `[0, pi]`.

use std::f64::consts::{FRAC_PI_2, PI};

use super::EwtError;

/// Ordered band edges `0 = w_0 < w_1 < ... < w_N = pi` and transition width `xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySet {
    omegas: Vec<f64>,
    xi: f64,
}

impl BoundarySet {
    /// Validates ordering, endpoints and the tight-frame bound on `xi`.
    pub fn new(omegas: Vec<f64>, xi: f64) -> Result<Self, EwtError> {
        if omegas.len() < 2 || omegas[0] != 0.0 || omegas[omegas.len() - 1] != PI {
            return Err(EwtError::InvalidBoundaries(
                "boundaries must start at 0 and end at pi".into(),
            ));
        }
        if omegas.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(EwtError::InvalidBoundaries(
                "boundaries must be strictly increasing".into(),
            ));
        }
        let bound = xi_bound(&omegas);
        if !(xi > 0.0 && xi < 1.0 && xi < bound) {
            return Err(EwtError::InvalidXi { xi, bound });
        }
        Ok(Self { omegas, xi })
    }

    /// Builds the set from interior edges with `xi = min(0.9 * bound, 0.5)`.
    pub fn with_auto_xi(interior: &[f64]) -> Result<Self, EwtError> {
        let mut omegas = Vec::with_capacity(interior.len() + 2);
        omegas.push(0.0);
        omegas.extend_from_slice(interior);
        omegas.push(PI);
        let xi = (0.9 * xi_bound(&omegas)).min(0.5);
        Self::new(omegas, xi)
    }

    /// The single all-pass segment `{0, pi}`.
    pub fn single() -> Self {
        Self {
            omegas: vec![0.0, PI],
            xi: 0.5,
        }
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn interior(&self) -> &[f64] {
        &self.omegas[1..self.omegas.len() - 1]
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Number of segments `N` (one scaling function plus `N - 1` wavelets).
    pub fn segments(&self) -> usize {
        self.omegas.len() - 1
    }
}

/// `min_n (w_{n+1} - w_n) / (w_{n+1} + w_n)` over consecutive edges.
pub fn xi_bound(omegas: &[f64]) -> f64 {
    omegas
        .windows(2)
        .map(|w| (w[1] - w[0]) / (w[1] + w[0]))
        .fold(f64::INFINITY, f64::min)
}

/// `v^4 (35 - 84v + 70v^2 - 20v^3)` on `[0, 1]`, clamped outside.
pub fn meyer_beta(v: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    v.powi(4) * (35.0 - 84.0 * v + 70.0 * v * v - 20.0 * v * v * v)
}

/// Frequency responses of the empirical filters on the order grid `w = pi m / U`, `m = 1..=U`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    responses: Vec<Vec<f64>>,
}

impl FilterBank {
    /// `responses()[r][m - 1]` is filter `r` at order `m`.
    pub fn responses(&self) -> &[Vec<f64>] {
        &self.responses
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    /// Largest deviation of `sum_r response_r^2` from 1 over the grid.
    pub fn partition_error(&self) -> f64 {
        let grid = self.responses.first().map_or(0, Vec::len);
        (0..grid)
            .map(|m| {
                let s: f64 = self.responses.iter().map(|r| r[m] * r[m]).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

pub fn build_filter_bank(boundaries: &BoundarySet, grid: usize) -> Result<FilterBank, EwtError> {
    let bound = xi_bound(boundaries.omegas());
    let xi = boundaries.xi();
    if !(xi > 0.0 && xi < bound) {
        return Err(EwtError::InvalidXi { xi, bound });
    }
    let omegas = boundaries.omegas();
    let segments = boundaries.segments();
    let responses = (0..segments)
        .map(|r| {
            (1..=grid)
                .map(|m| {
                    let w = PI * m as f64 / grid as f64;
                    segment_response(w, omegas[r], omegas[r + 1], r == 0, r + 1 == segments, xi)
                })
                .collect()
        })
        .collect();
    Ok(FilterBank { responses })
}

/// Response of the filter spanning `[lo, hi]`. The first segment has no lower
/// transition (scaling function); the last has no upper one (it ends at pi).
fn segment_response(w: f64, lo: f64, hi: f64, first: bool, last: bool, xi: f64) -> f64 {
    if !last {
        let (a, b) = ((1.0 - xi) * hi, (1.0 + xi) * hi);
        if w >= b {
            return 0.0;
        }
        if w > a {
            return (FRAC_PI_2 * meyer_beta((w - a) / (2.0 * xi * hi))).cos();
        }
    }
    if !first {
        let (a, b) = ((1.0 - xi) * lo, (1.0 + xi) * lo);
        if w <= a {
            return 0.0;
        }
        if w < b {
            return (FRAC_PI_2 * meyer_beta((w - a) / (2.0 * xi * lo))).sin();
        }
    }
    1.0
}
