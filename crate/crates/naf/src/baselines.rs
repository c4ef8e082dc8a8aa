//! Non-learned competitors: nearest/linear interpolation over training IRs,
//! a mu-law quantized codec standing in for general lossy audio coding, and
//! exact storage accounting.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::ImpulseResponseRecord;
use crate::error::{NafError, Result};
use crate::geom::Pose;

pub const CODEC_MAGIC: &[u8; 4] = b"MULQ";
pub const MU: f64 = 255.0;
const DISTANCE_EPS: f64 = 1e-6;

/// Joint Euclidean distance over (emitter, listener) in R^4.
pub fn pose_distance(a: &Pose, b: &Pose) -> f64 {
    let d = [
        a.emitter.0 - b.emitter.0,
        a.emitter.1 - b.emitter.1,
        a.listener.0 - b.listener.0,
        a.listener.1 - b.listener.1,
    ];
    d.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Candidates with the query's orientation, as (record index, distance),
/// in ascending index order.
fn candidates(
    records: &[ImpulseResponseRecord],
    train: &[usize],
    query: &Pose,
) -> Result<Vec<(usize, f64)>> {
    let out: Vec<(usize, f64)> = train
        .iter()
        .filter(|&&i| records[i].pose.orientation == query.orientation)
        .map(|&i| (i, pose_distance(&records[i].pose, query)))
        .collect();
    if out.is_empty() {
        return Err(NafError::Lookup(format!(
            "no training record with orientation {}",
            query.orientation
        )));
    }
    Ok(out)
}

/// Index of the training record closest to the query in R^4, restricted to
/// matching orientation. Ties go to the lowest record index.
pub fn nearest_ir(
    records: &[ImpulseResponseRecord],
    train: &[usize],
    query: &Pose,
) -> Result<usize> {
    let cands = candidates(records, train, query)?;
    let mut best = cands[0];
    for &(i, d) in &cands[1..] {
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interpolated {
    pub channels: [Vec<f32>; 2],
    /// Set when fewer than k matching candidates were available.
    pub fallback: bool,
}

/// Inverse-distance-weighted average of the k nearest matching-orientation
/// training IRs, sample-wise, with lengths aligned by zero-padding.
pub fn linear_ir(
    records: &[ImpulseResponseRecord],
    train: &[usize],
    query: &Pose,
    k: usize,
) -> Result<Interpolated> {
    if k == 0 {
        return Err(NafError::InvalidConfig("k must be positive".into()));
    }
    let mut cands = candidates(records, train, query)?;
    // A zero-distance candidate is the query itself: exact interpolation.
    if let Some(&(i, _)) = cands.iter().find(|&&(_, d)| d == 0.0) {
        return Ok(Interpolated {
            channels: records[i].channels.clone(),
            fallback: false,
        });
    }
    cands.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let fallback = cands.len() < k;
    cands.truncate(k);

    let weights: Vec<f64> = cands.iter().map(|&(_, d)| 1.0 / (d + DISTANCE_EPS)).collect();
    let total: f64 = weights.iter().sum();
    let max_len = cands
        .iter()
        .map(|&(i, _)| records[i].n_samples())
        .max()
        .unwrap();

    let mut channels = [vec![0.0f64; max_len], vec![0.0f64; max_len]];
    for (&(i, _), &w) in cands.iter().zip(&weights) {
        let w = w / total;
        for (c, acc) in channels.iter_mut().enumerate() {
            for (s, &x) in records[i].channels[c].iter().enumerate() {
                acc[s] += w * x as f64;
            }
        }
    }
    Ok(Interpolated {
        channels: channels.map(|ch| ch.iter().map(|&x| x as f32).collect()),
        fallback,
    })
}

fn mu_law_compress(x: f64) -> f64 {
    x.signum() * (1.0 + MU * x.abs()).ln() / (1.0 + MU).ln()
}

fn mu_law_expand(y: f64) -> f64 {
    y.signum() * ((1.0 + MU).powf(y.abs()) - 1.0) / MU
}

fn check_bits(bits: u8) -> Result<()> {
    if ![4, 8, 16].contains(&bits) {
        return Err(NafError::InvalidConfig(format!(
            "unsupported codec bit depth {bits} (expected 4, 8 or 16)"
        )));
    }
    Ok(())
}

/// Peak-normalized mu-law quantization of each channel.
///
/// Blob layout: "MULQ", u8 bit depth, u32 LE channel count, then per channel
/// (u32 LE length, f32 LE scale, packed codes).
pub fn quantize_codec_encode(channels: &[Vec<f32>], bits: u8) -> Result<Vec<u8>> {
    check_bits(bits)?;
    let q_max = (1i32 << (bits - 1)) - 1; // symmetric levels
    let mut blob = Vec::new();
    blob.extend_from_slice(CODEC_MAGIC);
    blob.push(bits);
    blob.extend_from_slice(&(channels.len() as u32).to_le_bytes());
    for ch in channels {
        let scale = ch.iter().fold(0.0f32, |m, &x| m.max(x.abs()));
        blob.extend_from_slice(&(ch.len() as u32).to_le_bytes());
        blob.extend_from_slice(&scale.to_le_bytes());
        let codes: Vec<u32> = ch
            .iter()
            .map(|&x| {
                let norm = if scale > 0.0 { x as f64 / scale as f64 } else { 0.0 };
                let q = (mu_law_compress(norm) * q_max as f64).round() as i32;
                (q.clamp(-q_max, q_max) + q_max) as u32
            })
            .collect();
        match bits {
            4 => {
                for pair in codes.chunks(2) {
                    let lo = pair[0] as u8;
                    let hi = *pair.get(1).unwrap_or(&0) as u8;
                    blob.push(lo | (hi << 4));
                }
            }
            8 => blob.extend(codes.iter().map(|&c| c as u8)),
            16 => {
                for &c in &codes {
                    blob.extend_from_slice(&(c as u16).to_le_bytes());
                }
            }
            _ => unreachable!(),
        }
    }
    Ok(blob)
}

pub fn quantize_codec_decode(blob: &[u8]) -> Result<Vec<Vec<f32>>> {
    if blob.len() < 9 || &blob[0..4] != CODEC_MAGIC {
        return Err(NafError::Decode("not a codec blob (bad magic)".into()));
    }
    let bits = blob[4];
    check_bits(bits).map_err(|_| NafError::Decode(format!("bad codec bit depth {bits}")))?;
    let q_max = (1i32 << (bits - 1)) - 1;
    let n_channels = u32::from_le_bytes([blob[5], blob[6], blob[7], blob[8]]) as usize;
    let mut offset = 9;
    let mut channels = Vec::with_capacity(n_channels);
    for _ in 0..n_channels {
        if blob.len() < offset + 8 {
            return Err(NafError::Decode("truncated codec blob".into()));
        }
        let len = u32::from_le_bytes(blob[offset..offset + 4].try_into().unwrap()) as usize;
        let scale = f32::from_le_bytes(blob[offset + 4..offset + 8].try_into().unwrap());
        offset += 8;
        let payload = match bits {
            4 => len.div_ceil(2),
            8 => len,
            16 => 2 * len,
            _ => unreachable!(),
        };
        if blob.len() < offset + payload {
            return Err(NafError::Decode("truncated codec blob".into()));
        }
        let mut codes = Vec::with_capacity(len);
        match bits {
            4 => {
                for i in 0..len {
                    let byte = blob[offset + i / 2];
                    codes.push(if i % 2 == 0 { byte & 0x0f } else { byte >> 4 } as u32);
                }
            }
            8 => codes.extend(blob[offset..offset + len].iter().map(|&b| b as u32)),
            16 => {
                for i in 0..len {
                    codes.push(u16::from_le_bytes([
                        blob[offset + 2 * i],
                        blob[offset + 2 * i + 1],
                    ]) as u32);
                }
            }
            _ => unreachable!(),
        }
        offset += payload;
        channels.push(
            codes
                .iter()
                .map(|&c| {
                    let q = c as i32 - q_max;
                    let y = q as f64 / q_max as f64;
                    // Clamp so the round-trip never exceeds the stored peak.
                    (mu_law_expand(y) * scale as f64).clamp(-(scale as f64), scale as f64) as f32
                })
                .collect(),
        );
    }
    if offset != blob.len() {
        return Err(NafError::Decode("trailing bytes in codec blob".into()));
    }
    Ok(channels)
}

/// Exact per-record blob bytes at a given depth (header excluded).
pub fn codec_record_bytes(n_samples: usize, bits: u8) -> usize {
    let payload = match bits {
        4 => n_samples.div_ceil(2),
        8 => n_samples,
        16 => 2 * n_samples,
        _ => 0,
    };
    8 + payload
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageReport {
    /// manifest.json + poses.bin + irs.bin, exact on-disk bytes.
    pub dataset_bytes: u64,
    pub model_bytes: Option<u64>,
    pub codec_bytes: Option<u64>,
    /// (method, bytes needed at query time).
    pub per_method: Vec<(String, u64)>,
}

/// Exact byte accounting. Interpolation baselines are charged the whole
/// training container since they need every training IR at query time.
pub fn storage_report(
    data_dir: &Path,
    model_path: Option<&Path>,
    codec_bytes: Option<u64>,
) -> Result<StorageReport> {
    let files = ["manifest.json", "poses.bin", "irs.bin"];
    let mut missing: Vec<PathBuf> = files
        .iter()
        .map(|f| data_dir.join(f))
        .filter(|p| !p.exists())
        .collect();
    if let Some(m) = model_path {
        if !m.exists() {
            missing.push(m.to_path_buf());
        }
    }
    if !missing.is_empty() {
        return Err(NafError::MissingFiles(missing));
    }
    let mut dataset_bytes = 0u64;
    for f in files {
        let p = data_dir.join(f);
        dataset_bytes += std::fs::metadata(&p).map_err(|e| NafError::io(&p, e))?.len();
    }
    let model_bytes = match model_path {
        Some(m) => Some(std::fs::metadata(m).map_err(|e| NafError::io(m, e))?.len()),
        None => None,
    };
    let mut per_method = Vec::new();
    if let Some(b) = model_bytes {
        per_method.push(("naf".to_string(), b));
    }
    per_method.push(("nearest".to_string(), dataset_bytes));
    per_method.push(("linear".to_string(), dataset_bytes));
    if let Some(b) = codec_bytes {
        per_method.push(("codec".to_string(), b));
    }
    Ok(StorageReport {
        dataset_bytes,
        model_bytes,
        codec_bytes,
        per_method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{write_dataset, DatasetManifest, FORMAT_VERSION};
    use crate::geom::SceneGeometry;

    fn record(e: (f64, f64), l: (f64, f64), orientation: usize, fill: f32) -> ImpulseResponseRecord {
        ImpulseResponseRecord {
            pose: Pose {
                emitter: e,
                listener: l,
                orientation,
            },
            channels: [vec![fill; 16], vec![-fill; 16]],
            sample_rate: 16000,
        }
    }

    fn toy_records() -> Vec<ImpulseResponseRecord> {
        vec![
            record((1.0, 1.0), (3.0, 3.0), 0, 0.1),
            record((2.0, 1.0), (3.0, 3.0), 0, 0.2),
            record((1.0, 2.0), (3.0, 3.0), 1, 0.3),
            record((2.0, 2.0), (3.0, 3.0), 0, 0.4),
        ]
    }

    #[test]
    fn nearest_exact_at_training_pose() {
        let records = toy_records();
        let train = vec![0, 1, 2, 3];
        let idx = nearest_ir(&records, &train, &records[1].pose).unwrap();
        assert_eq!(idx, 1);
    }

    #[test]
    fn nearest_tie_goes_to_lowest_index() {
        let records = toy_records();
        let train = vec![0, 1, 3];
        // (1.5, 1.0) is equidistant from records 0 and 1.
        let query = Pose {
            emitter: (1.5, 1.0),
            listener: (3.0, 3.0),
            orientation: 0,
        };
        assert_eq!(nearest_ir(&records, &train, &query).unwrap(), 0);
    }

    #[test]
    fn nearest_requires_matching_orientation() {
        let records = toy_records();
        let train = vec![0, 1, 3];
        let query = Pose {
            emitter: (1.0, 1.0),
            listener: (3.0, 3.0),
            orientation: 2,
        };
        assert!(matches!(
            nearest_ir(&records, &train, &query),
            Err(NafError::Lookup(_))
        ));
        // A single candidate wins regardless of distance.
        let far = Pose {
            emitter: (9.0, 9.0),
            listener: (0.0, 0.0),
            orientation: 1,
        };
        assert_eq!(nearest_ir(&records, &vec![2], &far).unwrap(), 2);
    }

    #[test]
    fn linear_exact_at_training_pose() {
        let records = toy_records();
        let train = vec![0, 1, 3];
        let out = linear_ir(&records, &train, &records[3].pose, 4).unwrap();
        assert_eq!(out.channels, records[3].channels);
    }

    #[test]
    fn linear_symmetric_average() {
        let records = toy_records();
        let train = vec![0, 1];
        // Equidistant from records 0 (fill 0.1) and 1 (fill 0.2).
        let query = Pose {
            emitter: (1.5, 1.0),
            listener: (3.0, 3.0),
            orientation: 0,
        };
        let out = linear_ir(&records, &train, &query, 2).unwrap();
        for &v in &out.channels[0] {
            assert!((v - 0.15).abs() < 1e-7);
        }
    }

    #[test]
    fn linear_fallback_flag() {
        let records = toy_records();
        let train = vec![0, 1];
        let query = Pose {
            emitter: (1.4, 1.0),
            listener: (3.0, 3.0),
            orientation: 0,
        };
        let out = linear_ir(&records, &train, &query, 4).unwrap();
        assert!(out.fallback);
        let out = linear_ir(&records, &train, &query, 2).unwrap();
        assert!(!out.fallback);
    }

    #[test]
    fn linear_pads_unequal_lengths() {
        let mut records = toy_records();
        records[1].channels = [vec![0.2; 8], vec![-0.2; 8]];
        let train = vec![0, 1];
        let query = Pose {
            emitter: (1.5, 1.0),
            listener: (3.0, 3.0),
            orientation: 0,
        };
        let out = linear_ir(&records, &train, &query, 2).unwrap();
        assert_eq!(out.channels[0].len(), 16);
        // Tail only has record 0's contribution at weight 1/2.
        assert!((out.channels[0][12] - 0.05).abs() < 1e-7);
    }

    #[test]
    fn codec_zero_fixed_point() {
        let blob = quantize_codec_encode(&[vec![0.0; 10]], 8).unwrap();
        let out = quantize_codec_decode(&blob).unwrap();
        assert_eq!(out[0], vec![0.0; 10]);
    }

    #[test]
    fn codec_rejects_bad_depth() {
        assert!(quantize_codec_encode(&[vec![0.1]], 7).is_err());
        assert!(quantize_codec_encode(&[vec![0.1]], 0).is_err());
    }

    #[test]
    fn codec_blob_size_arithmetic() {
        for &bits in &[4u8, 8, 16] {
            let n = 101;
            let blob = quantize_codec_encode(&[vec![0.5; n]], bits).unwrap();
            assert_eq!(blob.len(), 9 + codec_record_bytes(n, bits));
        }
    }

    #[test]
    fn codec_ramp_error_at_8_bits() {
        // Full-scale ramp at 8 bits: the worst-case mu-law cell near peak
        // level spans ~0.022 in sample units, i.e. ~1.1% of the 2.0
        // peak-to-peak full scale. Assert < 2% of full scale.
        let ramp: Vec<f32> = (0..1000).map(|i| i as f32 / 999.0 * 2.0 - 1.0).collect();
        let blob = quantize_codec_encode(&[ramp.clone()], 8).unwrap();
        let out = quantize_codec_decode(&blob).unwrap();
        let full_scale = 2.0f32;
        let max_err = ramp
            .iter()
            .zip(&out[0])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(max_err / full_scale < 0.02, "max err {max_err}");
    }

    #[test]
    fn codec_snr_on_speechlike_signal() {
        let signal: Vec<f32> = (0..4000)
            .map(|i| {
                let t = i as f32 / 16000.0;
                ((-t * 8.0).exp())
                    * ((2.0 * std::f32::consts::PI * 220.0 * t).sin()
                        + 0.5 * (2.0 * std::f32::consts::PI * 447.0 * t).sin())
            })
            .collect();
        let blob = quantize_codec_encode(&[signal.clone()], 8).unwrap();
        let out = quantize_codec_decode(&blob).unwrap();
        let (mut sig, mut noise) = (0.0f64, 0.0f64);
        for (a, b) in signal.iter().zip(&out[0]) {
            sig += (*a as f64).powi(2);
            noise += (*a as f64 - *b as f64).powi(2);
        }
        let snr = 10.0 * (sig / noise).log10();
        assert!(snr > 30.0, "snr {snr} dB");
    }

    #[test]
    fn codec_never_increases_peak() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for &bits in &[4u8, 8, 16] {
            let ch: Vec<f32> = (0..256).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let peak = ch.iter().fold(0.0f32, |m, &x| m.max(x.abs()));
            let blob = quantize_codec_encode(&[ch], bits).unwrap();
            let out = quantize_codec_decode(&blob).unwrap();
            let peak_out = out[0].iter().fold(0.0f32, |m, &x| m.max(x.abs()));
            assert!(peak_out <= peak);
        }
    }

    #[test]
    fn codec_truncation_detected() {
        let blob = quantize_codec_encode(&[vec![0.5; 32]], 16).unwrap();
        assert!(matches!(
            quantize_codec_decode(&blob[..blob.len() - 3]),
            Err(NafError::Decode(_))
        ));
        assert!(matches!(
            quantize_codec_decode(b"XXXX"),
            Err(NafError::Decode(_))
        ));
    }

    #[test]
    fn storage_report_exact_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let scene = SceneGeometry::shoebox(5.0, 4.0, 3.0, 0.3);
        let records = vec![
            record((1.0, 1.0), (3.0, 3.0), 0, 0.1),
            record((2.0, 1.0), (3.0, 3.0), 1, 0.2),
        ];
        let manifest = DatasetManifest {
            format_version: FORMAT_VERSION,
            sample_rate: 16000,
            n_samples: 16,
            n_records: 2,
            fft_size: 16,
            hop: 4,
            window: "hann".into(),
            split_seed: 0,
            test_indices: vec![1],
            scene,
        };
        write_dataset(&manifest, &records, dir.path()).unwrap();
        let report = storage_report(dir.path(), None, Some(123)).unwrap();
        let expected: u64 = ["manifest.json", "poses.bin", "irs.bin"]
            .iter()
            .map(|f| std::fs::metadata(dir.path().join(f)).unwrap().len())
            .sum();
        assert_eq!(report.dataset_bytes, expected);
        // irs.bin alone is exactly 4 * n * 2 * n_samples bytes.
        assert_eq!(
            std::fs::metadata(dir.path().join("irs.bin")).unwrap().len(),
            4 * 2 * 2 * 16
        );
        assert!(report
            .per_method
            .contains(&("codec".to_string(), 123)));
    }

    #[test]
    fn storage_report_lists_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        match storage_report(dir.path(), Some(&dir.path().join("no.naf")), None) {
            Err(NafError::MissingFiles(paths)) => assert_eq!(paths.len(), 4),
            other => panic!("expected MissingFiles, got {other:?}"),
        }
    }
}
