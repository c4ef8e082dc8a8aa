//! On-disk model format:
//!   bytes 0..4   magic "NAF1"
//!   bytes 4..8   u32 LE header length
//!   header       JSON (config, meta, parameter shapes, norm bin count)
//!   payload      f32 LE: parameter groups in declared order, then the
//!                normalization means, then the normalization stds

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{grid_lattice, FieldModel, ModelConfig, ModelMeta, ParamGroup, ParamShape};
use crate::dsp::NormStats;
use crate::error::{NafError, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"NAF1";

#[derive(Debug, Serialize, Deserialize)]
struct ModelHeader {
    format_version: u32,
    config: ModelConfig,
    meta: ModelMeta,
    params: Vec<ParamShape>,
    n_norm_bins: usize,
}

const HEADER_VERSION: u32 = 1;

/// Writes the model; returns the total file size in bytes.
pub fn save_model(model: &FieldModel, path: &Path) -> Result<u64> {
    let header = ModelHeader {
        format_version: HEADER_VERSION,
        config: model.config.clone(),
        meta: model.meta.clone(),
        params: model
            .params
            .iter()
            .map(|p| ParamShape {
                name: p.name.clone(),
                shape: p.shape.clone(),
            })
            .collect(),
        n_norm_bins: model.norm.mean.len(),
    };
    let header_json = serde_json::to_vec(&header)?;

    let n_values: usize =
        model.params.iter().map(|p| p.values.len()).sum::<usize>() + 2 * model.norm.mean.len();
    let mut bytes = Vec::with_capacity(8 + header_json.len() + 4 * n_values);
    bytes.extend_from_slice(MODEL_MAGIC);
    bytes.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    let push_f32 = |values: &[f64], bytes: &mut Vec<u8>| {
        for &v in values {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    };
    for p in &model.params {
        push_f32(&p.values, &mut bytes);
    }
    push_f32(&model.norm.mean, &mut bytes);
    push_f32(&model.norm.std, &mut bytes);
    fs::write(path, &bytes).map_err(|e| NafError::io(path, e))?;
    Ok(bytes.len() as u64)
}

pub fn load_model(path: &Path) -> Result<FieldModel> {
    let bytes = fs::read(path).map_err(|e| NafError::io(path, e))?;
    if bytes.len() < 8 || &bytes[0..4] != MODEL_MAGIC {
        return Err(NafError::Decode("not a model file (bad magic)".into()));
    }
    let header_len = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    let payload_start = 8 + header_len;
    if bytes.len() < payload_start {
        return Err(NafError::Decode("truncated model header".into()));
    }
    let header: ModelHeader = serde_json::from_slice(&bytes[8..payload_start])
        .map_err(|e| NafError::Decode(format!("model header: {e}")))?;
    if header.format_version != HEADER_VERSION {
        return Err(NafError::Decode(format!(
            "unsupported model format_version {}",
            header.format_version
        )));
    }

    let n_param_values: usize = header.params.iter().map(|p| p.shape.iter().product::<usize>()).sum();
    let expected = payload_start + 4 * (n_param_values + 2 * header.n_norm_bins);
    if bytes.len() != expected {
        return Err(NafError::Decode(format!(
            "model payload has {} bytes, expected {expected}",
            bytes.len()
        )));
    }

    let mut offset = payload_start;
    let mut take = |n: usize| -> Vec<f64> {
        let out = bytes[offset..offset + 4 * n]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        offset += 4 * n;
        out
    };
    let params: Vec<ParamGroup> = header
        .params
        .iter()
        .map(|p| {
            let n = p.shape.iter().product::<usize>();
            ParamGroup {
                name: p.name.clone(),
                shape: p.shape.clone(),
                values: take(n),
            }
        })
        .collect();
    let mean = take(header.n_norm_bins);
    let std = take(header.n_norm_bins);
    if header.n_norm_bins != header.meta.n_freq * header.meta.n_time {
        return Err(NafError::Decode(format!(
            "norm bin count {} does not match {}x{}",
            header.n_norm_bins, header.meta.n_freq, header.meta.n_time
        )));
    }
    let norm = NormStats {
        mean,
        std,
        n_freq: header.meta.n_freq,
        n_time: header.meta.n_time,
    };

    let n_grids = match header.config.grid_mode {
        super::GridMode::Shared => 1,
        super::GridMode::Dual => 2,
        super::GridMode::None => 0,
    };
    let grid_points: Vec<Vec<(f64, f64)>> = (0..n_grids)
        .map(|_| {
            grid_lattice(
                header.meta.scene_width,
                header.meta.scene_depth,
                header.config.grid_spacing,
            )
        })
        .collect();
    for (g, pts) in grid_points.iter().enumerate() {
        let idx = params
            .iter()
            .position(|p| p.name == format!("grid{g}.features"))
            .ok_or_else(|| NafError::Decode(format!("missing grid{g}.features group")))?;
        if params[idx].shape[0] != pts.len() {
            return Err(NafError::Decode(format!(
                "grid{g} has {} lattice points but {} feature rows",
                pts.len(),
                params[idx].shape[0]
            )));
        }
    }

    Ok(FieldModel {
        config: header.config,
        meta: header.meta,
        params,
        norm,
        grid_points,
    })
}
