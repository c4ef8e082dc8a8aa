//! Dataset container: a directory holding `manifest.json`, `poses.bin` and
//! `irs.bin`. Binary payloads are little-endian float32, trivially
//! memory-mappable and language-neutral.
//!
//! Layout:
//!   poses.bin — row-major [n_records, 5]: emitter x, emitter y, listener x,
//!               listener y, orientation index as float
//!   irs.bin   — row-major [n_records, 2, n_samples]

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NafError, Result};
use crate::geom::{Pose, SceneGeometry};

pub const FORMAT_VERSION: u32 = 1;

/// One binaural impulse response. The ear is the channel axis:
/// channel 0 = left, channel 1 = right.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponseRecord {
    pub pose: Pose,
    pub channels: [Vec<f32>; 2],
    pub sample_rate: u32,
}

impl ImpulseResponseRecord {
    pub fn validate(&self) -> Result<()> {
        if self.channels[0].len() != self.channels[1].len() {
            return Err(NafError::InvalidDataset(
                "channel lengths differ".into(),
            ));
        }
        for ch in &self.channels {
            if ch.iter().any(|s| !s.is_finite()) {
                return Err(NafError::InvalidDataset("non-finite IR sample".into()));
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.channels[0].len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub sample_rate: u32,
    pub n_samples: usize,
    pub n_records: usize,
    pub fft_size: usize,
    pub hop: usize,
    pub window: String,
    pub split_seed: u64,
    pub test_indices: Vec<usize>,
    pub scene: SceneGeometry,
}

impl DatasetManifest {
    pub fn train_indices(&self) -> Vec<usize> {
        let test: std::collections::HashSet<usize> = self.test_indices.iter().copied().collect();
        (0..self.n_records).filter(|i| !test.contains(i)).collect()
    }
}

/// Deterministic random split into disjoint, exhaustive train/test index sets.
/// |test| = round(test_fraction * n_records).
pub fn split_dataset(
    n_records: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_records < 2 {
        return Err(NafError::InvalidDataset(format!(
            "need at least 2 records, got {n_records}"
        )));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(NafError::InvalidConfig(format!(
            "test_fraction {test_fraction} outside (0,1)"
        )));
    }
    let n_test = ((test_fraction * n_records as f64).round() as usize).clamp(1, n_records - 1);
    let mut indices: Vec<usize> = (0..n_records).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let mut test: Vec<usize> = indices[..n_test].to_vec();
    let mut train: Vec<usize> = indices[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Writes the container directory. Fails without partial output if the
/// records are inconsistent with the manifest.
pub fn write_dataset(
    manifest: &DatasetManifest,
    records: &[ImpulseResponseRecord],
    dir: &Path,
) -> Result<()> {
    if records.len() != manifest.n_records {
        return Err(NafError::InvalidDataset(format!(
            "manifest says {} records, got {}",
            manifest.n_records,
            records.len()
        )));
    }
    manifest.scene.validate()?;
    for rec in records {
        rec.validate()?;
        rec.pose.validate(&manifest.scene)?;
        if rec.n_samples() != manifest.n_samples {
            return Err(NafError::InvalidDataset(format!(
                "record has {} samples, manifest says {}",
                rec.n_samples(),
                manifest.n_samples
            )));
        }
        if rec.sample_rate != manifest.sample_rate {
            return Err(NafError::InvalidDataset("sample rate mismatch".into()));
        }
    }
    fs::create_dir_all(dir).map_err(|e| NafError::io(dir, e))?;

    let manifest_path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(manifest)?;
    fs::write(&manifest_path, json).map_err(|e| NafError::io(&manifest_path, e))?;

    let poses_path = dir.join("poses.bin");
    let mut poses = Vec::with_capacity(records.len() * 5 * 4);
    for rec in records {
        for v in [
            rec.pose.emitter.0 as f32,
            rec.pose.emitter.1 as f32,
            rec.pose.listener.0 as f32,
            rec.pose.listener.1 as f32,
            rec.pose.orientation as f32,
        ] {
            poses.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(&poses_path, poses).map_err(|e| NafError::io(&poses_path, e))?;

    let irs_path = dir.join("irs.bin");
    let mut file = fs::File::create(&irs_path).map_err(|e| NafError::io(&irs_path, e))?;
    let mut buf = Vec::with_capacity(manifest.n_samples * 4);
    for rec in records {
        for ch in &rec.channels {
            buf.clear();
            for &s in ch {
                buf.extend_from_slice(&s.to_le_bytes());
            }
            file.write_all(&buf).map_err(|e| NafError::io(&irs_path, e))?;
        }
    }
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let manifest_path = dir.join("manifest.json");
    let json = fs::read_to_string(&manifest_path).map_err(|e| NafError::io(&manifest_path, e))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&json).map_err(|e| NafError::Decode(format!("manifest.json: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(NafError::Decode(format!(
            "unsupported format_version {} (expected {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    Ok(manifest)
}

pub fn read_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<ImpulseResponseRecord>)> {
    let manifest = read_manifest(dir)?;

    let poses_path = dir.join("poses.bin");
    let poses_bytes = fs::read(&poses_path).map_err(|e| NafError::io(&poses_path, e))?;
    let expected = manifest.n_records * 5 * 4;
    if poses_bytes.len() != expected {
        return Err(NafError::Decode(format!(
            "poses.bin has {} bytes, expected {expected}",
            poses_bytes.len()
        )));
    }

    let irs_path = dir.join("irs.bin");
    let mut irs_file = fs::File::open(&irs_path).map_err(|e| NafError::io(&irs_path, e))?;
    let per_record = 2 * manifest.n_samples * 4;
    let expected_irs = manifest.n_records as u64 * per_record as u64;
    let actual = irs_file
        .metadata()
        .map_err(|e| NafError::io(&irs_path, e))?
        .len();
    if actual != expected_irs {
        return Err(NafError::Decode(format!(
            "irs.bin has {actual} bytes, expected {expected_irs} (truncated or padded payload)"
        )));
    }

    let mut records = Vec::with_capacity(manifest.n_records);
    let mut rec_buf = vec![0u8; per_record];
    for i in 0..manifest.n_records {
        let p = &poses_bytes[i * 20..(i + 1) * 20];
        let f = |j: usize| f32::from_le_bytes([p[4 * j], p[4 * j + 1], p[4 * j + 2], p[4 * j + 3]]);
        let orientation = f(4) as usize;
        if orientation > 3 {
            return Err(NafError::Decode(format!(
                "record {i}: orientation index {orientation} outside 0..=3"
            )));
        }
        let pose = Pose {
            emitter: (f(0) as f64, f(1) as f64),
            listener: (f(2) as f64, f(3) as f64),
            orientation,
        };
        irs_file
            .read_exact(&mut rec_buf)
            .map_err(|e| NafError::io(&irs_path, e))?;
        let mut channels = [Vec::new(), Vec::new()];
        for (c, ch) in channels.iter_mut().enumerate() {
            let base = c * manifest.n_samples * 4;
            *ch = rec_buf[base..base + manifest.n_samples * 4]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
        }
        records.push(ImpulseResponseRecord {
            pose,
            channels,
            sample_rate: manifest.sample_rate,
        });
    }
    Ok((manifest, records))
}
