//! Signal-processing kernels shared by the simulator, the field model and
//! the evaluation code. All operations are pure functions; RNG state is
//! always an explicit seed.

mod mfcc;
mod stft;
mod t60;

pub use mfcc::mfcc;
pub use stft::{istft, random_phase_inverse, stft, ComplexSpectrogram, StftConfig};
pub use t60::estimate_t60;

use crate::error::{NafError, Result};

/// Floor added to magnitudes before the log; bounds the dynamic range of
/// training targets.
pub const MAG_FLOOR: f64 = 1e-3;

/// Floor on per-bin standard deviations; silent/padded bins have zero
/// variance.
pub const STD_FLOOR: f64 = 1e-6;

/// F x T log-magnitude spectrogram, row-major by frequency:
/// `values[f * n_time + t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values: Vec<f64>,
    pub n_freq: usize,
    pub n_time: usize,
}

impl Spectrogram {
    pub fn get(&self, f: usize, t: usize) -> f64 {
        self.values[f * self.n_time + t]
    }
}

/// Per-bin normalization statistics over a training set of spectrograms.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub n_freq: usize,
    pub n_time: usize,
}

impl NormStats {
    /// Mean and std per (f, t) bin over the given spectrograms. Stds are
    /// floored at [`STD_FLOOR`].
    pub fn compute(specs: &[&Spectrogram]) -> Result<NormStats> {
        let first = specs
            .first()
            .ok_or_else(|| NafError::InvalidInput("no spectrograms".into()))?;
        let (n_freq, n_time) = (first.n_freq, first.n_time);
        let n_bins = n_freq * n_time;
        let mut mean = vec![0.0f64; n_bins];
        let mut m2 = vec![0.0f64; n_bins];
        for s in specs {
            if s.n_freq != n_freq || s.n_time != n_time {
                return Err(NafError::InvalidShape {
                    op: "norm_stats",
                    detail: "spectrogram shapes differ".into(),
                });
            }
            for (i, &v) in s.values.iter().enumerate() {
                mean[i] += v;
                m2[i] += v * v;
            }
        }
        let n = specs.len() as f64;
        let mut std = vec![0.0f64; n_bins];
        for i in 0..n_bins {
            mean[i] /= n;
            let var = (m2[i] / n - mean[i] * mean[i]).max(0.0);
            std[i] = var.sqrt().max(STD_FLOOR);
        }
        Ok(NormStats {
            mean,
            std,
            n_freq,
            n_time,
        })
    }
}

/// ln(|z| + MAG_FLOOR) per bin.
pub fn log_magnitude(spec: &ComplexSpectrogram) -> Spectrogram {
    Spectrogram {
        values: spec.values.iter().map(|z| (z.norm() + MAG_FLOOR).ln()).collect(),
        n_freq: spec.n_freq,
        n_time: spec.n_time,
    }
}

/// Full linear convolution; output length = len(a) + len(b) - 1.
/// FFT-backed for long inputs, direct otherwise; both paths accumulate in
/// f64.
pub fn convolve(signal: &[f32], ir: &[f32]) -> Result<Vec<f64>> {
    if signal.is_empty() || ir.is_empty() {
        return Err(NafError::InvalidInput("convolve: empty input".into()));
    }
    let out_len = signal.len() + ir.len() - 1;
    if signal.len().min(ir.len()) <= 32 {
        let mut out = vec![0.0f64; out_len];
        for (i, &a) in signal.iter().enumerate() {
            let a = a as f64;
            for (j, &b) in ir.iter().enumerate() {
                out[i + j] += a * b as f64;
            }
        }
        return Ok(out);
    }
    let fft_len = out_len.next_power_of_two();
    let mut planner = rustfft::FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(fft_len);
    let ifft = planner.plan_fft_inverse(fft_len);
    let mut a: Vec<rustfft::num_complex::Complex<f64>> = signal
        .iter()
        .map(|&x| rustfft::num_complex::Complex::new(x as f64, 0.0))
        .chain(std::iter::repeat(rustfft::num_complex::Complex::new(0.0, 0.0)))
        .take(fft_len)
        .collect();
    let mut b: Vec<rustfft::num_complex::Complex<f64>> = ir
        .iter()
        .map(|&x| rustfft::num_complex::Complex::new(x as f64, 0.0))
        .chain(std::iter::repeat(rustfft::num_complex::Complex::new(0.0, 0.0)))
        .take(fft_len)
        .collect();
    fft.process(&mut a);
    fft.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    ifft.process(&mut a);
    let scale = 1.0 / fft_len as f64;
    Ok(a[..out_len].iter().map(|z| z.re * scale).collect())
}

/// MSE over all (f, t) bins of two log-magnitude spectrograms.
pub fn spectral_loss(pred: &Spectrogram, gt: &Spectrogram) -> Result<f64> {
    if pred.n_freq != gt.n_freq || pred.n_time != gt.n_time {
        return Err(NafError::InvalidShape {
            op: "spectral_loss",
            detail: format!(
                "{}x{} vs {}x{}",
                pred.n_freq, pred.n_time, gt.n_freq, gt.n_time
            ),
        });
    }
    let n = pred.values.len() as f64;
    let sum: f64 = pred
        .values
        .iter()
        .zip(&gt.values)
        .map(|(&p, &g)| (p - g) * (p - g))
        .sum();
    Ok(sum / n)
}

/// 10 log10(mean(x^2) + 1e-12).
pub fn loudness_db(ir: &[f32]) -> f64 {
    let n = ir.len().max(1) as f64;
    let energy: f64 = ir.iter().map(|&x| (x as f64) * (x as f64)).sum();
    10.0 * (energy / n + 1e-12).log10()
}
