//! Training loop: per-bin normalized log-magnitude regression with Adam,
//! coordinate noise and stochastic padding.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{FieldModel, ForwardBatch, ModelConfig, ModelMeta, SIGMA_FLOOR};
use crate::autodiff::{adam_step, AdamState};
use crate::dataset::{DatasetManifest, ImpulseResponseRecord};
use crate::dsp::{log_magnitude, stft, NormStats, Spectrogram, StftConfig};
use crate::error::{NafError, Result};
use crate::exec;

/// Samples quieter than this fraction of the record's peak do not count
/// toward its effective length.
pub const EFFECTIVE_LENGTH_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Impulse responses sampled per optimization step.
    pub irs_per_batch: usize,
    /// (t, f) bins sampled per impulse response per step.
    pub coords_per_ir: usize,
    pub lr: f64,
    /// Multiplicative learning-rate decay applied once per epoch.
    pub lr_decay: f64,
    /// Std of the Gaussian noise added to continuous coordinates, in scaled
    /// units.
    pub coord_noise_std: f64,
    /// Probability of sampling time bins from the full padded range rather
    /// than the record's effective length.
    pub pad_prob: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            irs_per_batch: 20,
            coords_per_ir: 2000,
            lr: 5e-4,
            lr_decay: 0.99,
            coord_noise_std: 0.1,
            pad_prob: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub epoch_loss: Vec<f64>,
    pub final_loss: f64,
    pub n_parameters: usize,
}

/// Number of STFT frames that carry signal above the effective-length
/// threshold.
fn effective_frames(record: &ImpulseResponseRecord, hop: usize, n_time: usize) -> usize {
    let mut peak = 0.0f32;
    for ch in &record.channels {
        for &s in ch {
            peak = peak.max(s.abs());
        }
    }
    if peak == 0.0 {
        return 1;
    }
    let threshold = peak as f64 * EFFECTIVE_LENGTH_THRESHOLD;
    let mut last = 0usize;
    for ch in &record.channels {
        for (i, &s) in ch.iter().enumerate() {
            if (s.abs() as f64) >= threshold {
                last = last.max(i);
            }
        }
    }
    ((last + 1).div_ceil(hop)).clamp(1, n_time)
}

/// Fits a field model on the manifest's training split.
pub fn train(
    manifest: &DatasetManifest,
    records: &[ImpulseResponseRecord],
    model_config: ModelConfig,
    cfg: &TrainConfig,
) -> Result<(FieldModel, TrainReport)> {
    let train_idx = manifest.train_indices();
    train_subset(manifest, records, &train_idx, model_config, cfg)
}

/// Fits on an explicit subset of record indices (used by ablations).
pub fn train_subset(
    manifest: &DatasetManifest,
    records: &[ImpulseResponseRecord],
    train_idx: &[usize],
    model_config: ModelConfig,
    cfg: &TrainConfig,
) -> Result<(FieldModel, TrainReport)> {
    if records.len() != manifest.n_records {
        return Err(NafError::InvalidDataset(format!(
            "manifest says {} records, got {}",
            manifest.n_records,
            records.len()
        )));
    }
    if cfg.epochs == 0 || cfg.irs_per_batch == 0 || cfg.coords_per_ir == 0 {
        return Err(NafError::InvalidConfig(
            "epochs, irs_per_batch and coords_per_ir must be positive".into(),
        ));
    }
    let stft_cfg = StftConfig {
        fft_size: manifest.fft_size,
        hop: manifest.hop,
        window: manifest.window.clone(),
    };
    stft_cfg.validate()?;
    let n_freq = stft_cfg.n_freq();
    let n_time = stft_cfg.n_time(manifest.n_samples);

    if train_idx.is_empty() {
        return Err(NafError::InvalidDataset("empty training split".into()));
    }
    if let Some(&bad) = train_idx.iter().find(|&&i| i >= records.len()) {
        return Err(NafError::InvalidDataset(format!(
            "training index {bad} out of range"
        )));
    }

    // Log-magnitude spectrograms of every training record, both ears.
    let specs: Vec<[Spectrogram; 2]> = exec::map_indexed(train_idx.len(), |i| {
        let rec = &records[train_idx[i]];
        let mk = |ch: &[f32]| log_magnitude(&stft(ch, &stft_cfg).expect("validated stft config"));
        [mk(&rec.channels[0]), mk(&rec.channels[1])]
    });
    let eff_frames: Vec<usize> = train_idx
        .iter()
        .map(|&r| effective_frames(&records[r], manifest.hop, n_time))
        .collect();

    let refs: Vec<&Spectrogram> = specs.iter().flat_map(|pair| pair.iter()).collect();
    let norm = NormStats::compute(&refs)?;

    // Normalized targets, indexed like the spectrograms.
    let norm_specs: Vec<[Vec<f64>; 2]> = specs
        .iter()
        .map(|pair| {
            [0, 1].map(|e| {
                pair[e]
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| (v - norm.mean[i]) / (3.0 * norm.std[i]))
                    .collect()
            })
        })
        .collect();

    let meta = ModelMeta {
        scene_width: manifest.scene.width,
        scene_depth: manifest.scene.depth,
        sample_rate: manifest.sample_rate,
        n_samples: manifest.n_samples,
        stft: stft_cfg,
        n_freq,
        n_time,
    };
    let mut model = FieldModel::init(model_config, meta, norm, cfg.seed);
    let mut adam: Vec<AdamState> = model
        .params
        .iter()
        .map(|p| AdamState::new(p.values.len()))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let noise = Normal::new(0.0, cfg.coord_noise_std).map_err(|e| {
        NafError::InvalidConfig(format!("coord_noise_std {}: {e}", cfg.coord_noise_std))
    })?;

    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train_idx.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr * cfg.lr_decay.powi(epoch as i32);
        order.shuffle(&mut rng);
        let mut losses = Vec::new();
        for chunk in order.chunks(cfg.irs_per_batch) {
            let mut batch = ForwardBatch::default();
            let mut targets = Vec::with_capacity(chunk.len() * cfg.coords_per_ir);
            for &local in chunk {
                let rec = &records[train_idx[local]];
                let (lx, ly) = model.scale_position(rec.pose.listener);
                let (ex, ey) = model.scale_position(rec.pose.emitter);
                for _ in 0..cfg.coords_per_ir {
                    let ear = rng.gen_range(0..2usize);
                    let t_max = if rng.gen_bool(cfg.pad_prob) {
                        n_time
                    } else {
                        eff_frames[local]
                    };
                    let t = rng.gen_range(0..t_max);
                    let f = rng.gen_range(0..n_freq);
                    batch.listener.push((
                        lx + noise.sample(&mut rng),
                        ly + noise.sample(&mut rng),
                    ));
                    batch.emitter.push((
                        ex + noise.sample(&mut rng),
                        ey + noise.sample(&mut rng),
                    ));
                    batch.orientation.push(rec.pose.orientation);
                    batch.ear.push(ear);
                    batch.t.push(model.scale_time(t) + noise.sample(&mut rng));
                    batch.f.push(model.scale_freq(f) + noise.sample(&mut rng));
                    targets.push(norm_specs[local][ear][f * n_time + t]);
                }
            }

            let mut tape = crate::autodiff::Tape::new();
            let leaves = model.leaves(&mut tape, true);
            let (out, _) = model.forward_tape(&mut tape, &leaves, &batch)?;
            let loss = tape.mse(out, targets)?;
            losses.push(tape.values(loss)[0]);
            let grads = tape.backward(loss)?;
            for (g, group) in model.params.iter_mut().enumerate() {
                if let Some(grad) = grads.get(leaves.0[g]) {
                    adam_step(&mut group.values, grad, &mut adam[g], lr);
                    if group.name.ends_with(".bandwidths") {
                        for v in group.values.iter_mut() {
                            *v = v.max(SIGMA_FLOOR);
                        }
                    }
                }
            }
        }
        epoch_loss.push(losses.iter().sum::<f64>() / losses.len() as f64);
    }

    model.snap_to_f32();
    let final_loss = *epoch_loss.last().unwrap();
    let n_parameters = model.n_parameters();
    Ok((
        model,
        TrainReport {
            epoch_loss,
            final_loss,
            n_parameters,
        },
    ))
}
