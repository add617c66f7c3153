//! Raised-cosine subband PSDs.
//!
//! The band is split into `n_subbands` contiguous segments of (roughly)
//! equal length `len`. Each segment carries one bump
//! `amp · cos²(π (k − c) / (2w))` for `|k − c| < w`, with half-width
//! `w = 0.6 · len` and its center bin `c` jittered by at most `len / 20`
//! around the segment middle. Neighboring centers are then at least
//! `1.5 w` apart, so supports only overlap in the convex tails of the bumps
//! and every bump contributes exactly one local maximum, while the bumps
//! jointly cover the band without interior gaps.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Psd;
use crate::error::{Error, Result};

const HALF_WIDTH_FRACTION: f64 = 0.6;
const CENTER_JITTER_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdConfig {
    pub k: usize,
    pub n_subbands: usize,
    /// Upper bound on `‖c‖₂`; the spectrum is rescaled down when exceeded.
    pub kappa: f64,
    /// Use this amplitude for every bump instead of drawing from `[0.5, 1]`.
    pub fixed_amplitude: Option<f64>,
}

impl PsdConfig {
    pub fn new(k: usize, n_subbands: usize, kappa: f64) -> Self {
        Self {
            k,
            n_subbands,
            kappa,
            fixed_amplitude: None,
        }
    }
}

/// Evaluate a sum of raised-cosine bumps `(center, half_width, amplitude)`
/// on `k` bins.
pub fn raised_cosine_psd(k: usize, bumps: &[(f64, f64, f64)]) -> Array1<f64> {
    Array1::from_shape_fn(k, |bin| {
        bumps
            .iter()
            .map(|&(c, w, amp)| {
                let x = bin as f64 - c;
                if x.abs() < w {
                    let t = (std::f64::consts::PI * x / (2.0 * w)).cos();
                    amp * t * t
                } else {
                    0.0
                }
            })
            .sum()
    })
}

/// Random subband PSD; deterministic per seed.
pub fn gen_psd(config: &PsdConfig, seed: u64) -> Result<Psd> {
    let PsdConfig {
        k,
        n_subbands,
        kappa,
        fixed_amplitude,
    } = *config;
    if n_subbands == 0 || n_subbands > k {
        return Err(Error::invalid(format!(
            "need 1 <= n_subbands <= K, got n_subbands = {n_subbands}, K = {k}"
        )));
    }
    if !(kappa > 0.0) {
        return Err(Error::invalid("kappa must be positive"));
    }
    if let Some(a) = fixed_amplitude {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::invalid("fixed amplitude must be positive"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<_> = (0..n_subbands)
        .map(|s| {
            let start = s * k / n_subbands;
            let end = (s + 1) * k / n_subbands;
            let len = (end - start) as f64;
            let jitter = CENTER_JITTER_FRACTION * len * (2.0 * rng.random::<f64>() - 1.0);
            let center = (start as f64 + (len - 1.0) / 2.0 + jitter)
                .round()
                .clamp(start as f64, (end - 1) as f64);
            let amp = fixed_amplitude.unwrap_or_else(|| rng.random_range(0.5..=1.0));
            (center, HALF_WIDTH_FRACTION * len, amp)
        })
        .collect();

    let mut values = raised_cosine_psd(k, &bumps);
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > kappa {
        values.mapv_inplace(|v| v * kappa / norm);
    }
    Psd::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn local_maxima_above(v: &Array1<f64>, frac: f64) -> usize {
        let max = v.iter().copied().fold(0.0, f64::max);
        let n = v.len();
        (0..n)
            .filter(|&i| {
                let left = if i == 0 { f64::NEG_INFINITY } else { v[i - 1] };
                let right = if i + 1 == n { f64::NEG_INFINITY } else { v[i + 1] };
                v[i] > left && v[i] >= right && v[i] > frac * max
            })
            .count()
    }

    #[test]
    fn full_occupancy_with_equal_amplitudes_is_flat() {
        let cfg = PsdConfig {
            fixed_amplitude: Some(0.8),
            ..PsdConfig::new(16, 16, 100.0)
        };
        let p = gen_psd(&cfg, 3).unwrap();
        assert!(p.values().iter().all(|&v| v > 0.0));
        assert!(p.values().iter().all(|&v| (v - 0.8).abs() < 1e-12));
    }

    #[test]
    fn contract_holds_across_seeds() {
        for seed in 0..50 {
            for &(k, n, kappa) in &[(64, 3, 2.0), (64, 5, 100.0), (17, 4, 0.5), (8, 8, 1.0)] {
                let p = gen_psd(&PsdConfig::new(k, n, kappa), seed).unwrap();
                assert_eq!(p.len(), k);
                assert!(p.values().iter().all(|&v| v >= 0.0));
                assert!(p.norm() <= kappa * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn three_subbands_give_three_peaks_at_seed_one() {
        let p = gen_psd(&PsdConfig::new(64, 3, 100.0), 1).unwrap();
        assert_eq!(local_maxima_above(p.values(), 0.25), 3);
    }

    #[test]
    fn peak_count_matches_subbands_generally() {
        for seed in 0..100 {
            for n in 1..=6 {
                let p = gen_psd(&PsdConfig::new(64, n, 100.0), seed).unwrap();
                assert_eq!(local_maxima_above(p.values(), 0.25), n, "seed {seed} n {n}");
            }
        }
    }

    #[test]
    fn band_interior_has_no_zeros() {
        let p = gen_psd(&PsdConfig::new(64, 4, 100.0), 9).unwrap();
        let zeros = p.values().iter().filter(|&&v| v == 0.0).count();
        assert!(zeros <= 2, "zeros {zeros}");
    }

    #[test]
    fn too_many_subbands_rejected() {
        assert!(gen_psd(&PsdConfig::new(8, 9, 1.0), 0).is_err());
        assert!(gen_psd(&PsdConfig::new(8, 0, 1.0), 0).is_err());
    }
}
