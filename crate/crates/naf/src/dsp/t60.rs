//! T60 reverberation time via Schroeder backward energy integration and a
//! least-squares fit of the decay curve between -5 dB and -35 dB.

use crate::error::{NafError, Result};

pub fn estimate_t60(ir: &[f32], sample_rate: u32) -> Result<f64> {
    if ir.is_empty() {
        return Err(NafError::InvalidInput("estimate_t60: empty IR".into()));
    }
    // Backward cumulative energy.
    let mut decay = vec![0.0f64; ir.len()];
    let mut acc = 0.0f64;
    for (i, &x) in ir.iter().enumerate().rev() {
        acc += x as f64 * x as f64;
        decay[i] = acc;
    }
    let total = decay[0];
    if total <= 0.0 {
        return Err(NafError::EstimationFailure("zero-energy IR".into()));
    }
    let db: Vec<f64> = decay.iter().map(|&e| 10.0 * (e / total).log10()).collect();

    let start = db
        .iter()
        .position(|&d| d <= -5.0)
        .ok_or_else(|| NafError::EstimationFailure("decay never reaches -5 dB".into()))?;
    let end = db
        .iter()
        .position(|&d| d <= -35.0)
        .ok_or_else(|| NafError::EstimationFailure("decay never reaches -35 dB".into()))?;
    if end <= start + 1 {
        return Err(NafError::EstimationFailure("decay range too short".into()));
    }

    // Least-squares line through (time, dB) on [start, end].
    let sr = sample_rate as f64;
    let n = (end - start + 1) as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for i in start..=end {
        let x = i as f64 / sr;
        let y = db[i];
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = n * sxx - sx * sx;
    if denom <= 0.0 {
        return Err(NafError::EstimationFailure("degenerate fit".into()));
    }
    let slope = (n * sxy - sx * sy) / denom; // dB per second, negative
    if slope >= 0.0 {
        return Err(NafError::EstimationFailure("non-decaying curve".into()));
    }
    Ok(60.0 / slope.abs())
}
