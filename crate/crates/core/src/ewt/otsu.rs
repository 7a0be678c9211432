//! Otsu's threshold over small nonnegative integer samples.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OtsuError {
    #[error("need at least two values, got {0}")]
    TooFewValues(usize),
    #[error("all values are equal; no split exists")]
    DegenerateInput,
}

/// Threshold `t` maximising the between-class variance of `{v < t}` vs `{v >= t}`.
///
/// Candidates are the integers in `(min, max]`. Every threshold between two
/// consecutive distinct values yields the same partition, so the smallest
/// maximiser is always one more than a value present in the input. The
/// comparison is carried out in exact integer arithmetic so ties resolve
/// deterministically.
pub fn otsu_threshold(values: &[u32]) -> Result<u32, OtsuError> {
    if values.len() < 2 {
        return Err(OtsuError::TooFewValues(values.len()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(OtsuError::DegenerateInput);
    }

    let total_n = sorted.len() as u128;
    let total_sum: u128 = sorted.iter().map(|&v| v as u128).sum();

    // Between-class variance is proportional to (n1*s0 - n0*s1)^2 / (n0*n1).
    let mut best: Option<(u128, u128, u32)> = None;
    let mut n0 = 0u128;
    let mut s0 = 0u128;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        while i < sorted.len() && sorted[i] == v {
            n0 += 1;
            s0 += v as u128;
            i += 1;
        }
        if i == sorted.len() {
            break;
        }
        let n1 = total_n - n0;
        let s1 = total_sum - s0;
        let diff = (n1 * s0).abs_diff(n0 * s1);
        let num = diff * diff;
        let den = n0 * n1;
        let better = match best {
            None => true,
            Some((bn, bd, _)) => num * bd > bn * den,
        };
        if better {
            best = Some((num, den, v + 1));
        }
    }
    Ok(best.expect("at least two distinct values").2)
}
