//! Per-distribution probability estimates: MLE, Laplace, Good-Turing, Katz
//! and pseudo-Laplace. Every function takes a raw count `C(x)` and the
//! statistics of the distribution it was drawn from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::FrequencySpectrum;

/// What Good-Turing does when `N_{r+1} = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GtFallback {
    /// Plain `(r+1) N_{r+1} / N_r`, which is zero here.
    Raw,
    /// Keep the count unadjusted.
    #[default]
    Unadjusted,
    /// Interpolate `N_{r+1}` linearly between `N_r` and the next populated
    /// class; unadjusted when there is none.
    Interpolate,
}

pub fn prob_mle(count: u64, total: u64) -> Result<f64> {
    if total == 0 {
        return Err(Error::Empty("MLE over an empty table".into()));
    }
    Ok(count as f64 / total as f64)
}

/// Good-Turing adjusted count `r* = (r+1) N_{r+1} / N_r`.
pub fn gt_adjusted_count(r: u64, spectrum: &FrequencySpectrum, fallback: GtFallback) -> Result<f64> {
    let nr = spectrum.get(r);
    if r == 0 || nr == 0 {
        return Err(Error::UnpopulatedClass(r));
    }
    let next = spectrum.get(r + 1);
    if next > 0 {
        return Ok((r + 1) as f64 * next as f64 / nr as f64);
    }
    Ok(match fallback {
        GtFallback::Raw => 0.0,
        GtFallback::Unadjusted => r as f64,
        GtFallback::Interpolate => match spectrum.next_class(r) {
            Some((r2, n2)) => {
                let t = 1.0 / (r2 - r) as f64;
                let interpolated = nr as f64 + t * (n2 as f64 - nr as f64);
                (r + 1) as f64 * interpolated / nr as f64
            }
            None => r as f64,
        },
    })
}

fn unseen_mass(spectrum: &FrequencySpectrum, total: u64, unseen_types: f64) -> Result<f64> {
    if !(unseen_types > 0.0) || !unseen_types.is_finite() {
        return Err(Error::InvalidConfig(format!("unseen type estimate E must be > 0, got {unseen_types}")));
    }
    Ok(spectrum.hapaxes() as f64 / total as f64 / unseen_types)
}

/// `C*(x)/N` for seen names, `(N_1/N) / E` for unseen ones.
pub fn prob_good_turing(
    count: u64,
    spectrum: &FrequencySpectrum,
    total: u64,
    unseen_types: f64,
    fallback: GtFallback,
) -> Result<f64> {
    if total == 0 {
        return Err(Error::Empty("Good-Turing over an empty table".into()));
    }
    if count == 0 {
        return unseen_mass(spectrum, total, unseen_types);
    }
    Ok(gt_adjusted_count(count, spectrum, fallback)? / total as f64)
}

/// MLE above `cutoff`, Good-Turing for `1..=cutoff`, the unseen share otherwise.
pub fn prob_katz(
    count: u64,
    spectrum: &FrequencySpectrum,
    total: u64,
    unseen_types: f64,
    cutoff: u64,
    fallback: GtFallback,
) -> Result<f64> {
    if count > cutoff {
        return prob_mle(count, total);
    }
    prob_good_turing(count, spectrum, total, unseen_types, fallback)
}

/// `(C(x) + α) / (N + α |V|)`.
pub fn prob_laplace(count: u64, total: u64, alpha: f64, vocab_size: usize) -> Result<f64> {
    let denom = total as f64 + alpha * vocab_size as f64;
    if !(alpha >= 0.0) || denom <= 0.0 {
        return Err(Error::InvalidConfig(format!("Laplace needs α > 0 or a nonempty context (α={alpha})")));
    }
    Ok((count as f64 + alpha) / denom)
}

/// `C(x) / (N + α)` if seen, `α / (N + α)` otherwise. A score: it does not
/// sum to one.
pub fn prob_pseudo_laplace(count: u64, total: u64, alpha: f64) -> Result<f64> {
    let denom = total as f64 + alpha;
    if !(alpha >= 0.0) || denom <= 0.0 {
        return Err(Error::InvalidConfig(format!("pseudo-Laplace needs α > 0 or a nonempty context (α={alpha})")));
    }
    Ok(if count > 0 { count as f64 } else { alpha } / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(pairs: &[(u64, u64)]) -> FrequencySpectrum {
        FrequencySpectrum::from_classes(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn adjusted_counts() {
        let s = spec(&[(1, 100), (2, 50), (3, 10)]);
        assert_eq!(gt_adjusted_count(1, &s, GtFallback::Unadjusted).unwrap(), 1.0);
        let s = spec(&[(1, 100), (2, 50), (3, 10), (5, 2)]);
        assert_eq!(gt_adjusted_count(3, &s, GtFallback::Unadjusted).unwrap(), 3.0);
        assert_eq!(gt_adjusted_count(3, &s, GtFallback::Raw).unwrap(), 0.0);
        // N_4 interpolated as 10 + (2 - 10)/2 = 6
        assert!((gt_adjusted_count(3, &s, GtFallback::Interpolate).unwrap() - 4.0 * 6.0 / 10.0).abs() < 1e-12);
        assert_eq!(gt_adjusted_count(5, &s, GtFallback::Interpolate).unwrap(), 5.0);
        assert!(matches!(gt_adjusted_count(4, &s, GtFallback::Raw), Err(Error::UnpopulatedClass(4))));
    }

    #[test]
    fn good_turing_branches() {
        let s = spec(&[(1, 100), (2, 50)]);
        assert!((prob_good_turing(1, &s, 1000, 200.0, GtFallback::Unadjusted).unwrap() - 0.001).abs() < 1e-15);
        let unseen = prob_good_turing(0, &s, 1000, 200.0, GtFallback::Unadjusted).unwrap();
        assert!((unseen - 5e-4).abs() < 1e-15);
        assert!(prob_good_turing(0, &s, 1000, 0.0, GtFallback::Unadjusted).is_err());
        assert!(prob_good_turing(0, &s, 1000, -1.0, GtFallback::Unadjusted).is_err());
    }

    #[test]
    fn katz_branches() {
        let s = spec(&[(1, 100), (2, 50), (3, 30), (4, 5), (10, 1)]);
        assert_eq!(prob_katz(10, &s, 1000, 200.0, 3, GtFallback::Unadjusted).unwrap(), 0.01);
        assert!((prob_katz(2, &s, 1000, 200.0, 3, GtFallback::Unadjusted).unwrap() - 0.0018).abs() < 1e-15);
        // boundary: C = cutoff uses GT, C = cutoff + 1 uses MLE
        let gt3 = 4.0 * 5.0 / 30.0 / 1000.0;
        assert!((prob_katz(3, &s, 1000, 200.0, 3, GtFallback::Unadjusted).unwrap() - gt3).abs() < 1e-15);
        assert_eq!(prob_katz(4, &s, 1000, 200.0, 3, GtFallback::Unadjusted).unwrap(), 0.004);
    }

    #[test]
    fn laplace_and_pseudo_laplace() {
        assert!((prob_laplace(1, 4, 1.0, 6).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(prob_pseudo_laplace(5, 100, 1.0).unwrap(), 5.0 / 101.0);
        assert_eq!(prob_pseudo_laplace(0, 100, 1.0).unwrap(), 1.0 / 101.0);
        assert_eq!(prob_pseudo_laplace(0, 4, 1.0).unwrap(), 0.2);
        assert!(prob_pseudo_laplace(0, 0, 0.0).is_err());
        assert!(prob_laplace(0, 0, 0.0, 5).is_err());
        assert!(prob_mle(1, 0).is_err());
    }
}
