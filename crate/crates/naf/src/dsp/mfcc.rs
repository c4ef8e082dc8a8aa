//! Mel-frequency cepstral coefficients: power STFT, triangular HTK-mel
//! filterbank, floored log, orthonormal type-II DCT.

use super::stft::{stft, StftConfig};
use crate::error::Result;

pub const MFCC_LOG_FLOOR: f64 = 1e-10;

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10.0f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filterbank: n_mels rows of n_freq weights.
fn mel_filterbank(n_mels: usize, n_freq: usize, fft_size: usize, sample_rate: u32) -> Vec<Vec<f64>> {
    let sr = sample_rate as f64;
    let max_mel = hz_to_mel(sr / 2.0);
    let points: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(max_mel * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = |k: usize| k as f64 * sr / fft_size as f64;
    (0..n_mels)
        .map(|m| {
            let (lo, mid, hi) = (points[m], points[m + 1], points[m + 2]);
            (0..n_freq)
                .map(|k| {
                    let f = bin_hz(k);
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II of `x`, truncated to the first `n_out` coefficients.
fn dct2(x: &[f64], n_out: usize) -> Vec<f64> {
    let n = x.len();
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            let sum: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    v * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64)
                        .cos()
                })
                .sum();
            scale * sum
        })
        .collect()
}

/// MFCC matrix, row-major [n_coeff, n_frames].
pub fn mfcc(
    ir: &[f32],
    sample_rate: u32,
    cfg: &StftConfig,
    n_coeff: usize,
    n_mels: usize,
) -> Result<Vec<Vec<f64>>> {
    let spec = stft(ir, cfg)?;
    let filters = mel_filterbank(n_mels, spec.n_freq, cfg.fft_size, sample_rate);
    let mut out = vec![vec![0.0f64; spec.n_time]; n_coeff];
    let mut log_energies = vec![0.0f64; n_mels];
    for t in 0..spec.n_time {
        for (m, filter) in filters.iter().enumerate() {
            let e: f64 = filter
                .iter()
                .enumerate()
                .map(|(f, &w)| w * spec.values[f * spec.n_time + t].norm_sqr())
                .sum();
            log_energies[m] = (e + MFCC_LOG_FLOOR).ln();
        }
        for (c, v) in dct2(&log_energies, n_coeff).into_iter().enumerate() {
            out[c][t] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg() -> StftConfig {
        StftConfig::default()
    }

    #[test]
    fn silence_gives_constant_floor_frames() {
        let coeffs = mfcc(&vec![0.0f32; 2000], 16000, &cfg(), 13, 24).unwrap();
        let expected_c0 = (24.0f64).sqrt() * MFCC_LOG_FLOOR.ln();
        for t in 0..coeffs[0].len() {
            assert_abs_diff_eq!(coeffs[0][t], expected_c0, epsilon = 1e-9);
            for c in 1..13 {
                assert_abs_diff_eq!(coeffs[c][t], 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn default_shape() {
        let coeffs = mfcc(&vec![0.1f32; 1600], 16000, &cfg(), 13, 24).unwrap();
        assert_eq!(coeffs.len(), 13);
        assert_eq!(coeffs[0].len(), 1600usize.div_ceil(128));
    }

    #[test]
    fn scaling_shifts_only_coefficient_zero() {
        // Log-scale property, checked numerically: power scales by c^2, the
        // log gains a constant, and only the DC basis vector sees a constant.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let ir: Vec<f32> = (0..3000).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let scaled: Vec<f32> = ir.iter().map(|&x| x * 8.0).collect();
        let a = mfcc(&ir, 16000, &cfg(), 13, 24).unwrap();
        let b = mfcc(&scaled, 16000, &cfg(), 13, 24).unwrap();
        // Interior frames only; edge frames have near-floor energies where
        // the constant-shift property degrades.
        let n_frames = a[0].len();
        for t in 3..n_frames - 3 {
            let shift0 = b[0][t] - a[0][t];
            let expected = (24.0f64).sqrt() * 2.0 * 8.0f64.ln();
            assert_abs_diff_eq!(shift0, expected, epsilon = 1e-3);
            for c in 1..13 {
                assert_abs_diff_eq!(b[c][t], a[c][t], epsilon = 1e-3);
            }
        }
    }
}
