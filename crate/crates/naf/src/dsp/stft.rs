//! STFT with centered Hann-windowed frames, its exact-phase inverse, and
//! random-phase waveform reconstruction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{Spectrogram, MAG_FLOOR};
use crate::error::{NafError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub window: String,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            fft_size: 512,
            hop: 128,
            window: "hann".into(),
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.fft_size.is_power_of_two() {
            return Err(NafError::InvalidConfig(format!(
                "fft_size {} not a power of two",
                self.fft_size
            )));
        }
        if self.hop == 0 || self.hop > self.fft_size {
            return Err(NafError::InvalidConfig(format!(
                "hop {} outside 1..={}",
                self.hop, self.fft_size
            )));
        }
        if self.window != "hann" {
            return Err(NafError::InvalidConfig(format!(
                "unknown window {:?}",
                self.window
            )));
        }
        Ok(())
    }

    pub fn n_freq(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn n_time(&self, n_samples: usize) -> usize {
        n_samples.div_ceil(self.hop)
    }
}

/// Complex F x T STFT, row-major by frequency.
#[derive(Debug, Clone)]
pub struct ComplexSpectrogram {
    pub values: Vec<Complex<f64>>,
    pub n_freq: usize,
    pub n_time: usize,
}

/// Periodic Hann window.
fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()))
        .collect()
}

/// STFT with frame t centered at t*hop; out-of-range samples are zero.
/// F = fft_size/2 + 1, T = ceil(len/hop).
pub fn stft(signal: &[f32], cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    if signal.is_empty() {
        return Err(NafError::InvalidInput("stft: empty signal".into()));
    }
    cfg.validate()?;
    let n = cfg.fft_size;
    let half = n / 2;
    let window = hann(n);
    let n_freq = cfg.n_freq();
    let n_time = cfg.n_time(signal.len());
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);

    let mut values = vec![Complex::new(0.0, 0.0); n_freq * n_time];
    let mut frame = vec![Complex::new(0.0, 0.0); n];
    for t in 0..n_time {
        let center = (t * cfg.hop) as isize;
        for (k, slot) in frame.iter_mut().enumerate() {
            let idx = center - half as isize + k as isize;
            let x = if idx >= 0 && (idx as usize) < signal.len() {
                signal[idx as usize] as f64
            } else {
                0.0
            };
            *slot = Complex::new(x * window[k], 0.0);
        }
        fft.process(&mut frame);
        for f in 0..n_freq {
            values[f * n_time + t] = frame[f];
        }
    }
    Ok(ComplexSpectrogram {
        values,
        n_freq,
        n_time,
    })
}

/// Weighted overlap-add inverse. Exact for COLA-covered samples when the
/// frames carry true phase.
pub fn istft(spec: &ComplexSpectrogram, cfg: &StftConfig, out_len: usize) -> Result<Vec<f32>> {
    cfg.validate()?;
    let n = cfg.fft_size;
    let half = n / 2;
    if spec.n_freq != cfg.n_freq() {
        return Err(NafError::InvalidShape {
            op: "istft",
            detail: format!("n_freq {} != {}", spec.n_freq, cfg.n_freq()),
        });
    }
    let window = hann(n);
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(n);

    let mut out = vec![0.0f64; out_len];
    let mut norm = vec![0.0f64; out_len];
    let mut frame = vec![Complex::new(0.0, 0.0); n];
    for t in 0..spec.n_time {
        // Rebuild the full spectrum by conjugate symmetry.
        for f in 0..spec.n_freq {
            frame[f] = spec.values[f * spec.n_time + t];
        }
        for f in spec.n_freq..n {
            frame[f] = spec.values[(n - f) * spec.n_time + t].conj();
        }
        ifft.process(&mut frame);
        let center = (t * cfg.hop) as isize;
        for (k, z) in frame.iter().enumerate() {
            let idx = center - half as isize + k as isize;
            if idx >= 0 && (idx as usize) < out_len {
                let y = z.re / n as f64; // rustfft's inverse is unnormalized
                out[idx as usize] += y * window[k];
                norm[idx as usize] += window[k] * window[k];
            }
        }
    }
    Ok(out
        .iter()
        .zip(&norm)
        .map(|(&y, &w)| if w > 1e-8 { (y / w) as f32 } else { 0.0 })
        .collect())
}

/// Reconstructs a waveform from a log-magnitude spectrogram with phases
/// drawn i.i.d. uniform on [0, 2pi) per bin.
pub fn random_phase_inverse(
    spec: &Spectrogram,
    cfg: &StftConfig,
    out_len: usize,
    seed: u64,
) -> Result<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<Complex<f64>> = spec
        .values
        .iter()
        .map(|&v| {
            let mag = (v.exp() - MAG_FLOOR).max(0.0);
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            Complex::from_polar(mag, phase)
        })
        .collect();
    istft(
        &ComplexSpectrogram {
            values,
            n_freq: spec.n_freq,
            n_time: spec.n_time,
        },
        cfg,
        out_len,
    )
}
