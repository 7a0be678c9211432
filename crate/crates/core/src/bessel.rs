//! Bessel functions of the first kind (orders 0 and 1) and the positive zeros of `J0`.
//!
//! Small arguments use the ascending power series; large arguments use the
//! Hankel asymptotic expansion truncated at its smallest term. The crossover
//! at `|x| = 12` keeps both branches below ~1e-11 absolute error.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Arguments with `|x|` at or below this use the power series.
pub const SERIES_CUTOFF: f64 = 12.0;

/// `J0(x)`.
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= SERIES_CUTOFF {
        j0_series(ax)
    } else {
        let (p, q) = hankel_pq(0.0, ax);
        let (s, c) = ax.sin_cos();
        // chi = x - pi/4
        let cos_chi = (c + s) * FRAC_1_SQRT_2;
        let sin_chi = (s - c) * FRAC_1_SQRT_2;
        (2.0 / (PI * ax)).sqrt() * (p * cos_chi - q * sin_chi)
    }
}

/// `J1(x)`. Odd in `x`.
pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= SERIES_CUTOFF {
        j1_series(ax)
    } else {
        let (p, q) = hankel_pq(1.0, ax);
        let (s, c) = ax.sin_cos();
        // chi = x - 3pi/4
        let cos_chi = (s - c) * FRAC_1_SQRT_2;
        let sin_chi = -(s + c) * FRAC_1_SQRT_2;
        (2.0 / (PI * ax)).sqrt() * (p * cos_chi - q * sin_chi)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// Ascending series `sum (-1)^k (x^2/4)^k / (k!)^2`.
pub fn j0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * kf);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Ascending series `(x/2) sum (-1)^k (x^2/4)^k / (k! (k+1)!)`.
pub fn j1_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 0.5 * x;
    let mut sum = term;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * (kf + 1.0));
        sum += term;
        if term.abs() <= 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Hankel's `P_nu(x)` and `Q_nu(x)`, summed until the terms stop shrinking.
fn hankel_pq(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0_f64;
    for k in 1..64 {
        let odd = (2 * k - 1) as f64;
        let next = a * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= a.abs() {
            break;
        }
        a = next;
        // k = 1, 2, 3, 4, ... contributes +Q, -P, -Q, +P, ...
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    (p, q)
}

/// First positive zero of `J0` is roughly 2.405; consecutive zeros approach a spacing of `pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselRoots {
    roots: Vec<f64>,
}

impl BesselRoots {
    /// The first `count` positive zeros of `J0`, McMahon guess followed by Newton.
    pub fn j0(count: usize) -> Self {
        let roots = (1..=count).map(j0_root).collect();
        Self { roots }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.roots
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// `m` is 1-based, matching the order index of the expansion.
    pub fn get(&self, m: usize) -> Option<f64> {
        m.checked_sub(1).and_then(|i| self.roots.get(i).copied())
    }
}

/// The `m`-th positive zero of `J0` (1-based).
pub fn j0_root(m: usize) -> f64 {
    assert!(m >= 1, "root index is 1-based");
    let b = (m as f64 - 0.25) * PI;
    let b8 = 8.0 * b;
    let mut x = b + 1.0 / b8 - 124.0 / (3.0 * b8.powi(3)) + 120_928.0 / (15.0 * b8.powi(5));
    for _ in 0..50 {
        // J0' = -J1
        let step = bessel_j0(x) / bessel_j1(x);
        x += step;
        if step.abs() <= 4.0 * f64::EPSILON * x {
            break;
        }
    }
    x
}
