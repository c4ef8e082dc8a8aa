//! Minimal RIFF/WAV support: PCM 16-bit little-endian, mono or stereo.
//! Writing saturates out-of-range samples and reports the peak overflow.

use std::fs;
use std::path::Path;

use crate::error::{NafError, Result};

#[derive(Debug, Clone)]
pub struct WavData {
    /// One Vec per channel, samples in [-1, 1] nominal full scale.
    pub channels: Vec<Vec<f32>>,
    pub sample_rate: u32,
}

/// Outcome of a write: the largest |sample| seen, and whether clipping
/// occurred.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WriteReport {
    pub peak: f32,
    pub clipped: bool,
}

pub fn read_wav(path: &Path) -> Result<WavData> {
    let bytes = fs::read(path).map_err(|e| NafError::io(path, e))?;
    let err = |msg: &str| NafError::Decode(format!("{}: {msg}", path.display()));
    if bytes.len() < 44 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(err("not a RIFF/WAVE file"));
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let u32_at = |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);

    let mut pos = 12;
    let mut fmt: Option<(u16, u32, u16)> = None; // channels, rate, bits
    let mut data: Option<(usize, usize)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(pos + 4) as usize;
        let body = pos + 8;
        if body + size > bytes.len() {
            return Err(err("truncated chunk"));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(err("fmt chunk too small"));
                }
                let format = u16_at(body);
                if format != 1 {
                    return Err(err("only PCM supported"));
                }
                fmt = Some((u16_at(body + 2), u32_at(body + 4), u16_at(body + 14)));
            }
            b"data" => data = Some((body, size)),
            _ => {}
        }
        pos = body + size + (size & 1);
    }
    let (n_channels, sample_rate, bits) = fmt.ok_or_else(|| err("missing fmt chunk"))?;
    if bits != 16 {
        return Err(err("only 16-bit PCM supported"));
    }
    if n_channels == 0 || n_channels > 2 {
        return Err(err("only mono or stereo supported"));
    }
    let (start, size) = data.ok_or_else(|| err("missing data chunk"))?;
    let n_frames = size / (2 * n_channels as usize);
    let mut channels = vec![Vec::with_capacity(n_frames); n_channels as usize];
    for frame in 0..n_frames {
        for (c, ch) in channels.iter_mut().enumerate() {
            let i = start + (frame * n_channels as usize + c) * 2;
            let s = i16::from_le_bytes([bytes[i], bytes[i + 1]]);
            ch.push(s as f32 / 32768.0);
        }
    }
    Ok(WavData {
        channels,
        sample_rate,
    })
}

pub fn write_wav(path: &Path, data: &WavData) -> Result<WriteReport> {
    let n_channels = data.channels.len();
    if n_channels == 0 || n_channels > 2 {
        return Err(NafError::InvalidInput(
            "write_wav: only mono or stereo supported".into(),
        ));
    }
    let n_frames = data.channels[0].len();
    if data.channels.iter().any(|c| c.len() != n_frames) {
        return Err(NafError::InvalidInput(
            "write_wav: channel lengths differ".into(),
        ));
    }
    let data_size = (n_frames * n_channels * 2) as u32;
    let mut bytes = Vec::with_capacity(44 + data_size as usize);
    bytes.extend_from_slice(b"RIFF");
    bytes.extend_from_slice(&(36 + data_size).to_le_bytes());
    bytes.extend_from_slice(b"WAVEfmt ");
    bytes.extend_from_slice(&16u32.to_le_bytes());
    bytes.extend_from_slice(&1u16.to_le_bytes()); // PCM
    bytes.extend_from_slice(&(n_channels as u16).to_le_bytes());
    bytes.extend_from_slice(&data.sample_rate.to_le_bytes());
    let byte_rate = data.sample_rate * n_channels as u32 * 2;
    bytes.extend_from_slice(&byte_rate.to_le_bytes());
    bytes.extend_from_slice(&((n_channels * 2) as u16).to_le_bytes());
    bytes.extend_from_slice(&16u16.to_le_bytes());
    bytes.extend_from_slice(b"data");
    bytes.extend_from_slice(&data_size.to_le_bytes());

    let mut peak = 0.0f32;
    let mut clipped = false;
    for frame in 0..n_frames {
        for ch in &data.channels {
            let x = ch[frame];
            peak = peak.max(x.abs());
            let scaled = (x as f64 * 32767.0).round();
            let s = if scaled > 32767.0 {
                clipped = true;
                32767
            } else if scaled < -32768.0 {
                clipped = true;
                -32768
            } else {
                scaled as i16
            };
            bytes.extend_from_slice(&s.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| NafError::io(path, e))?;
    Ok(WriteReport { peak, clipped })
}
