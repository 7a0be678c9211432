//! Gaussian scale-space of a 1-D curve and persistence of its local minima.
//!
//! Minima are detected on the finest scale and followed through increasingly
//! smoothed copies of the curve by steepest descent. A minimum dies when its
//! descent path runs off either end of the curve or lands on a minimum already
//! claimed by a closer track. Its persistence is the number of consecutive
//! scales it survived, counting the finest scale.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSpaceConfig {
    /// Number of smoothing scales.
    pub scales: usize,
    /// Gaussian width of the finest scale, in spectrum bins.
    pub sigma0: f64,
    /// Ratio between consecutive widths.
    pub growth: f64,
    /// Kernel half-width in units of sigma.
    pub truncate: f64,
}

impl Default for ScaleSpaceConfig {
    fn default() -> Self {
        Self {
            scales: 32,
            sigma0: 0.5,
            growth: 1.15,
            truncate: 4.0,
        }
    }
}

impl ScaleSpaceConfig {
    pub fn sigma(&self, scale: usize) -> f64 {
        self.sigma0 * self.growth.powi(scale as i32)
    }
}

/// A tracked minimum: position on the finest scale and how long it lived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistentMinimum {
    pub index: usize,
    pub persistence: u32,
    /// Curve value at `index` on the finest scale.
    pub depth: f64,
}

/// Whole-sample symmetric reflection into `0..len`.
fn reflect(i: isize, len: usize) -> usize {
    let n = len as isize;
    let period = 2 * n;
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - 1 - j;
    }
    j as usize
}

pub fn gaussian_smooth(curve: &[f64], sigma: f64, truncate: f64) -> Vec<f64> {
    let len = curve.len();
    let radius = (truncate * sigma).ceil().max(1.0) as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= total);

    let padded: Vec<f64> = (-radius..len as isize + radius)
        .map(|i| curve[reflect(i, len)])
        .collect();
    padded
        .windows(kernel.len())
        .map(|win| win.iter().zip(&kernel).map(|(v, w)| v * w).sum())
        .collect()
}

/// Interior local minima. A flat run bounded by strictly larger neighbours on
/// both sides counts once, at its midpoint; runs touching either end are ignored.
pub fn local_minima(curve: &[f64]) -> Vec<usize> {
    let len = curve.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < len {
        if curve[i] < curve[i - 1] {
            let start = i;
            let mut end = i;
            while end + 1 < len && curve[end + 1] == curve[start] {
                end += 1;
            }
            if end + 1 < len && curve[end + 1] > curve[start] {
                out.push((start + end) / 2);
            }
            i = end + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Follows strictly decreasing neighbours from `start`. `None` if the walk
/// reaches either end.
fn descend(curve: &[f64], start: usize) -> Option<usize> {
    let len = curve.len();
    let mut p = start;
    loop {
        if p == 0 || p + 1 >= len {
            return None;
        }
        let (l, c, r) = (curve[p - 1], curve[p], curve[p + 1]);
        if l < c && l <= r {
            p -= 1;
        } else if r < c {
            p += 1;
        } else {
            return Some(p);
        }
    }
}

/// Every interior minimum of the finest scale with its persistence.
pub fn persistent_minima(curve: &[f64], cfg: &ScaleSpaceConfig) -> Vec<PersistentMinimum> {
    if cfg.scales == 0 || curve.len() < 3 {
        return Vec::new();
    }
    let finest = gaussian_smooth(curve, cfg.sigma(0), cfg.truncate);
    let seeds = local_minima(&finest);

    // (seed index, current position); None once dead.
    let mut tracks: Vec<Option<usize>> = seeds.iter().map(|&s| Some(s)).collect();
    let mut persistence = vec![1u32; seeds.len()];

    for scale in 1..cfg.scales {
        if tracks.iter().all(Option::is_none) {
            break;
        }
        let smoothed = gaussian_smooth(curve, cfg.sigma(scale), cfg.truncate);
        let minima = local_minima(&smoothed);
        let mut claims: Vec<Option<(usize, usize)>> = vec![None; minima.len()];

        for (t, slot) in tracks.iter_mut().enumerate() {
            let Some(pos) = *slot else { continue };
            let landed = descend(&smoothed, pos).and_then(|p| canonical(&smoothed, &minima, p));
            let Some(mi) = landed else {
                *slot = None;
                continue;
            };
            let dist = pos.abs_diff(minima[mi]);
            // Closest track keeps a shared minimum; the earlier claimant wins ties.
            match claims[mi] {
                Some((_, odist)) if odist <= dist => *slot = None,
                _ => claims[mi] = Some((t, dist)),
            }
        }
        // Only claim holders survive into the next scale.
        let mut next = vec![None; tracks.len()];
        for (mi, claim) in claims.iter().enumerate() {
            if let Some((t, _)) = claim {
                if tracks[*t].is_some() {
                    next[*t] = Some(minima[mi]);
                    persistence[*t] += 1;
                }
            }
        }
        tracks = next;
    }

    seeds
        .iter()
        .zip(&persistence)
        .map(|(&index, &p)| PersistentMinimum {
            index,
            persistence: p,
            depth: finest[index],
        })
        .collect()
}

/// Maps a descent end point (which may sit inside a flat run) to the index of
/// the corresponding entry in `minima`.
fn canonical(curve: &[f64], minima: &[usize], p: usize) -> Option<usize> {
    if let Ok(i) = minima.binary_search(&p) {
        return Some(i);
    }
    let v = curve[p];
    let mut lo = p;
    while lo > 0 && curve[lo - 1] == v {
        lo -= 1;
    }
    let mut hi = p;
    while hi + 1 < curve.len() && curve[hi + 1] == v {
        hi += 1;
    }
    minima.iter().position(|&m| m >= lo && m <= hi)
}
