//! Inference-side rendering: spectrograms, random-phase impulse responses
//! and loudness maps queried from a trained field.

use std::fs;
use std::path::Path;

use super::{FieldModel, ForwardBatch};
use crate::dsp::{loudness_db, random_phase_inverse, Spectrogram};
use crate::error::{NafError, Result};
use crate::geom::Pose;

/// Predicts the full F x T log-magnitude spectrogram for one ear,
/// denormalized back into the log domain.
pub fn render_spectrogram(model: &FieldModel, pose: &Pose, ear: usize) -> Result<Spectrogram> {
    if ear > 1 {
        return Err(NafError::InvalidInput(format!("ear index {ear}")));
    }
    if pose.orientation > 3 {
        return Err(NafError::InvalidInput(format!(
            "orientation index {}",
            pose.orientation
        )));
    }
    let (n_freq, n_time) = (model.meta.n_freq, model.meta.n_time);
    let n = n_freq * n_time;
    let listener = model.scale_position(pose.listener);
    let emitter = model.scale_position(pose.emitter);
    let mut batch = ForwardBatch {
        listener: vec![listener; n],
        emitter: vec![emitter; n],
        orientation: vec![pose.orientation; n],
        ear: vec![ear; n],
        t: Vec::with_capacity(n),
        f: Vec::with_capacity(n),
    };
    for f in 0..n_freq {
        for t in 0..n_time {
            batch.f.push(model.scale_freq(f));
            batch.t.push(model.scale_time(t));
        }
    }
    let (pred, _) = model.forward(&batch)?;
    let mut values = vec![0.0f64; n];
    for f in 0..n_freq {
        for t in 0..n_time {
            let i = f * n_time + t;
            values[i] = model.denormalize(pred[i], f, t);
        }
    }
    Ok(Spectrogram {
        values,
        n_freq,
        n_time,
    })
}

/// Binaural impulse response via random-phase inversion of the predicted
/// magnitudes. Deterministic in `seed`; the two ears use distinct derived
/// seeds.
pub fn render_ir(model: &FieldModel, pose: &Pose, seed: u64) -> Result<[Vec<f32>; 2]> {
    let mut out = [Vec::new(), Vec::new()];
    for ear in 0..2 {
        let spec = render_spectrogram(model, pose, ear)?;
        out[ear] = random_phase_inverse(
            &spec,
            &model.meta.stft,
            model.meta.n_samples,
            seed.wrapping_mul(2).wrapping_add(ear as u64),
        )?;
    }
    Ok(out)
}

/// Loudness sampled on a listener lattice for a fixed emitter, row-major
/// with `values[row * n_cols + col]`; row = y cell, col = x cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LoudnessMap {
    pub n_cols: usize,
    pub n_rows: usize,
    pub resolution: f64,
    pub emitter: (f64, f64),
    pub values: Vec<f64>,
}

impl LoudnessMap {
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            (col as f64 + 0.5) * self.resolution,
            (row as f64 + 0.5) * self.resolution,
        )
    }

    /// CSV with an `x,y,db` header, one row per cell.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("x,y,db\n");
        for row in 0..self.n_rows {
            for col in 0..self.n_cols {
                let (x, y) = self.cell_center(row, col);
                out.push_str(&format!(
                    "{x:.4},{y:.4},{:.4}\n",
                    self.values[row * self.n_cols + col]
                ));
            }
        }
        fs::write(path, out).map_err(|e| NafError::io(path, e))
    }

    /// 8-bit ASCII PGM, min..max mapped to 0..255.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = (hi - lo).max(1e-12);
        let mut out = format!("P2\n{} {}\n255\n", self.n_cols, self.n_rows);
        for row in 0..self.n_rows {
            let pixels: Vec<String> = (0..self.n_cols)
                .map(|col| {
                    let v = self.values[row * self.n_cols + col];
                    format!("{}", ((v - lo) / span * 255.0).round() as u32)
                })
                .collect();
            out.push_str(&pixels.join(" "));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| NafError::io(path, e))
    }
}

/// Renders a loudness map: for each listener cell center, the mean over both
/// ears of the loudness of the random-phase IR at orientation 0.
pub fn render_loudness_map(
    model: &FieldModel,
    emitter: (f64, f64),
    resolution: f64,
    seed: u64,
) -> Result<LoudnessMap> {
    if resolution <= 0.0 {
        return Err(NafError::InvalidConfig(format!(
            "resolution {resolution} must be positive"
        )));
    }
    let n_cols = (model.meta.scene_width / resolution).ceil() as usize;
    let n_rows = (model.meta.scene_depth / resolution).ceil() as usize;
    if n_cols == 0 || n_rows == 0 {
        return Err(NafError::InvalidConfig(
            "resolution larger than the scene".into(),
        ));
    }
    let mut values = Vec::with_capacity(n_rows * n_cols);
    for row in 0..n_rows {
        for col in 0..n_cols {
            let x = ((col as f64 + 0.5) * resolution).min(model.meta.scene_width);
            let y = ((row as f64 + 0.5) * resolution).min(model.meta.scene_depth);
            let pose = Pose {
                emitter,
                listener: (x, y),
                orientation: 0,
            };
            let irs = render_ir(model, &pose, seed)?;
            values.push((loudness_db(&irs[0]) + loudness_db(&irs[1])) / 2.0);
        }
    }
    Ok(LoudnessMap {
        n_cols,
        n_rows,
        resolution,
        emitter,
        values,
    })
}
