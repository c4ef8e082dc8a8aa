//! Evaluation metrics, ablation drivers and latent-structure probing.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{linear_ir, nearest_ir, quantize_codec_decode, quantize_codec_encode};
use crate::dataset::{DatasetManifest, ImpulseResponseRecord};
use crate::dsp::{estimate_t60, log_magnitude, mfcc, spectral_loss, stft, Spectrogram, StftConfig};
use crate::error::{NafError, Result};
use crate::exec;
use crate::field::{
    render_ir, render_spectrogram, train_subset, FieldModel, ForwardBatch, GridMode, ModelConfig,
    TrainConfig,
};
use crate::geom::{Pose, SceneGeometry};

pub const DEFAULT_RIDGE_LAMBDA: f64 = 1e-4;
pub const DEFAULT_CODEC_BITS: u8 = 8;
pub const N_PROBE_LISTENERS: usize = 5;
pub const MFCC_N_COEFF: usize = 13;
pub const MFCC_N_MELS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMethod {
    Naf,
    Nearest,
    Linear,
    CodecNearest,
    CodecLinear,
}

impl EvalMethod {
    pub fn name(&self) -> &'static str {
        match self {
            EvalMethod::Naf => "naf",
            EvalMethod::Nearest => "nearest",
            EvalMethod::Linear => "linear",
            EvalMethod::CodecNearest => "codec+nearest",
            EvalMethod::CodecLinear => "codec+linear",
        }
    }

    pub fn needs_model(&self) -> bool {
        matches!(self, EvalMethod::Naf)
    }

    pub fn needs_codec(&self) -> bool {
        matches!(self, EvalMethod::CodecNearest | EvalMethod::CodecLinear)
    }
}

impl std::str::FromStr for EvalMethod {
    type Err = NafError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naf" => Ok(EvalMethod::Naf),
            "nearest" => Ok(EvalMethod::Nearest),
            "linear" => Ok(EvalMethod::Linear),
            "codec+nearest" => Ok(EvalMethod::CodecNearest),
            "codec+linear" => Ok(EvalMethod::CodecLinear),
            other => Err(NafError::InvalidConfig(format!(
                "unknown eval method {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub n_records: usize,
    pub mean_spectral_loss: f64,
    /// None when no record yielded a valid T60 pair.
    pub mean_t60_error_pct: Option<f64>,
    /// (record, ear) pairs where both estimates were valid.
    pub t60_valid_pairs: usize,
    /// (record, ear) pairs dropped because either estimate failed.
    pub t60_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub n_records: usize,
    pub codec_bits: u8,
    pub results: Vec<MethodResult>,
}

impl EvalReport {
    /// Aligned plain-text table.
    pub fn text_table(&self) -> String {
        let mut out = format!(
            "{:<16} {:>10} {:>14} {:>12} {:>9}\n",
            "method", "spec loss", "t60 err (%)", "valid pairs", "failures"
        );
        for r in &self.results {
            let t60 = r
                .mean_t60_error_pct
                .map(|v| format!("{v:.2}"))
                .unwrap_or_else(|| "n/a".to_string());
            out.push_str(&format!(
                "{:<16} {:>10.4} {:>14} {:>12} {:>9}\n",
                r.method, r.mean_spectral_loss, t60, r.t60_valid_pairs, r.t60_failures
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub codec_bits: u8,
    /// Evaluate on the training split instead of the held-out one.
    pub split_train: bool,
    pub linear_k: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            codec_bits: DEFAULT_CODEC_BITS,
            split_train: false,
            linear_k: 4,
            seed: 0,
        }
    }
}

fn record_spectrograms(rec_channels: &[Vec<f32>; 2], cfg: &StftConfig) -> Result<[Spectrogram; 2]> {
    Ok([
        log_magnitude(&stft(&rec_channels[0], cfg)?),
        log_magnitude(&stft(&rec_channels[1], cfg)?),
    ])
}

/// Codec round-trip of the training records' channels; non-training records
/// are passed through untouched.
fn codec_round_trip(
    records: &[ImpulseResponseRecord],
    train: &[usize],
    bits: u8,
) -> Result<Vec<ImpulseResponseRecord>> {
    let mut out = records.to_vec();
    for &i in train {
        let blob = quantize_codec_encode(&records[i].channels, bits)?;
        let mut decoded = quantize_codec_decode(&blob)?;
        out[i].channels = [std::mem::take(&mut decoded[0]), std::mem::take(&mut decoded[1])];
    }
    Ok(out)
}

struct RecordScore {
    spec_loss: f64,
    t60_errors: Vec<f64>,
    t60_failures: usize,
}

/// Evaluates methods on one split: spectral loss in the un-normalized log
/// domain, plus T60 percentage error per ear with pairwise failure
/// exclusion.
pub fn evaluate(
    manifest: &DatasetManifest,
    records: &[ImpulseResponseRecord],
    methods: &[EvalMethod],
    model: Option<&FieldModel>,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if methods.is_empty() {
        return Err(NafError::InvalidConfig("no eval methods given".into()));
    }
    if methods.iter().any(|m| m.needs_model()) && model.is_none() {
        return Err(NafError::InvalidConfig(
            "method 'naf' requires a trained model".into(),
        ));
    }
    let stft_cfg = StftConfig {
        fft_size: manifest.fft_size,
        hop: manifest.hop,
        window: manifest.window.clone(),
    };
    let train_idx = manifest.train_indices();
    let eval_idx = if opts.split_train {
        train_idx.clone()
    } else {
        manifest.test_indices.clone()
    };
    if eval_idx.is_empty() {
        return Err(NafError::InvalidDataset("empty evaluation split".into()));
    }

    let decoded = if methods.iter().any(|m| m.needs_codec()) {
        Some(codec_round_trip(records, &train_idx, opts.codec_bits)?)
    } else {
        None
    };

    let sr = manifest.sample_rate;
    let mut results = Vec::with_capacity(methods.len());
    for method in methods {
        let scores: Vec<Result<RecordScore>> = exec::map_indexed(eval_idx.len(), |i| {
            let rec = &records[eval_idx[i]];
            let gt_specs = record_spectrograms(&rec.channels, &stft_cfg)?;
            let pred_channels: [Vec<f32>; 2];
            let pred_specs: [Spectrogram; 2];
            match method {
                EvalMethod::Naf => {
                    let model = model.unwrap();
                    pred_specs = [
                        render_spectrogram(model, &rec.pose, 0)?,
                        render_spectrogram(model, &rec.pose, 1)?,
                    ];
                    pred_channels =
                        render_ir(model, &rec.pose, opts.seed.wrapping_add(eval_idx[i] as u64))?;
                }
                EvalMethod::Nearest | EvalMethod::CodecNearest => {
                    let pool: &[ImpulseResponseRecord] = match method {
                        EvalMethod::CodecNearest => decoded.as_ref().unwrap(),
                        _ => records,
                    };
                    let j = nearest_ir(pool, &train_idx, &rec.pose)?;
                    pred_channels = pool[j].channels.clone();
                    pred_specs = record_spectrograms(&pred_channels, &stft_cfg)?;
                }
                EvalMethod::Linear | EvalMethod::CodecLinear => {
                    let pool: &[ImpulseResponseRecord] = match method {
                        EvalMethod::CodecLinear => decoded.as_ref().unwrap(),
                        _ => records,
                    };
                    let interp = linear_ir(pool, &train_idx, &rec.pose, opts.linear_k)?;
                    pred_channels = interp.channels;
                    pred_specs = record_spectrograms(&pred_channels, &stft_cfg)?;
                }
            }
            let mut spec_loss = 0.0;
            for ear in 0..2 {
                spec_loss += spectral_loss(&pred_specs[ear], &gt_specs[ear])?;
            }
            spec_loss /= 2.0;

            let mut t60_errors = Vec::new();
            let mut t60_failures = 0;
            for ear in 0..2 {
                match (
                    estimate_t60(&rec.channels[ear], sr),
                    estimate_t60(&pred_channels[ear], sr),
                ) {
                    (Ok(gt), Ok(pred)) => t60_errors.push(100.0 * (pred - gt).abs() / gt),
                    _ => t60_failures += 1,
                }
            }
            Ok(RecordScore {
                spec_loss,
                t60_errors,
                t60_failures,
            })
        });

        let mut spec_sum = 0.0;
        let mut t60_sum = 0.0;
        let mut t60_valid = 0usize;
        let mut t60_failed = 0usize;
        for s in scores {
            let s = s?;
            spec_sum += s.spec_loss;
            t60_valid += s.t60_errors.len();
            t60_sum += s.t60_errors.iter().sum::<f64>();
            t60_failed += s.t60_failures;
        }
        results.push(MethodResult {
            method: method.name().to_string(),
            n_records: eval_idx.len(),
            mean_spectral_loss: spec_sum / eval_idx.len() as f64,
            mean_t60_error_pct: (t60_valid > 0).then(|| t60_sum / t60_valid as f64),
            t60_valid_pairs: t60_valid,
            t60_failures: t60_failed,
        });
    }
    Ok(EvalReport {
        split: if opts.split_train { "train" } else { "test" }.to_string(),
        n_records: eval_idx.len(),
        codec_bits: opts.codec_bits,
        results,
    })
}

/// Mean spectral loss of model renderings against the given records.
pub fn naf_test_loss(
    model: &FieldModel,
    manifest: &DatasetManifest,
    records: &[ImpulseResponseRecord],
    indices: &[usize],
) -> Result<f64> {
    if indices.is_empty() {
        return Err(NafError::InvalidDataset("no records to score".into()));
    }
    let stft_cfg = StftConfig {
        fft_size: manifest.fft_size,
        hop: manifest.hop,
        window: manifest.window.clone(),
    };
    let losses: Vec<Result<f64>> = exec::map_indexed(indices.len(), |i| {
        let rec = &records[indices[i]];
        let gt = record_spectrograms(&rec.channels, &stft_cfg)?;
        let mut loss = 0.0;
        for ear in 0..2 {
            let pred = render_spectrogram(model, &rec.pose, ear)?;
            loss += spectral_loss(&pred, &gt[ear])?;
        }
        Ok(loss / 2.0)
    });
    let mut sum = 0.0;
    for l in losses {
        sum += l?;
    }
    Ok(sum / indices.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub fraction: f64,
    pub mode: String,
    pub n_train: usize,
    pub test_loss: f64,
}

/// Trains one model per (fraction, grid mode) on a seeded subsample of the
/// training split and scores each on the held-out split.
pub fn ablation_curve(
    manifest: &DatasetManifest,
    records: &[ImpulseResponseRecord],
    fractions: &[f64],
    modes: &[GridMode],
    base: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<Vec<AblationRow>> {
    use rand::seq::SliceRandom;
    if fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
        return Err(NafError::InvalidConfig(
            "fractions must lie in (0, 1]".into(),
        ));
    }
    let full_train = manifest.train_indices();
    let test_idx = manifest.test_indices.clone();
    let mut rows = Vec::with_capacity(fractions.len() * modes.len());
    for &fraction in fractions {
        let n = ((fraction * full_train.len() as f64).round() as usize).min(full_train.len());
        if n == 0 {
            return Err(NafError::InvalidConfig(format!(
                "fraction {fraction} leaves no training records"
            )));
        }
        let mut subset = full_train.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed ^ 0x5eed);
        subset.shuffle(&mut rng);
        subset.truncate(n);
        subset.sort_unstable();
        for &mode in modes {
            let config = ModelConfig {
                grid_mode: mode,
                ..base.clone()
            };
            let (model, _) = train_subset(manifest, records, &subset, config, tcfg)?;
            let test_loss = naf_test_loss(&model, manifest, records, &test_idx)?;
            rows.push(AblationRow {
                fraction,
                mode: format!("{mode:?}").to_lowercase(),
                n_train: n,
                test_loss,
            });
        }
    }
    Ok(rows)
}

/// Five fixed listener positions per scene, seeded once and reused for every
/// probed location.
pub fn fixed_listeners(scene: &SceneGeometry, seed: u64, n: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = rng.gen_range(0.0..scene.width);
        let y = rng.gen_range(0.0..scene.depth);
        if scene.contains(x, y) {
            out.push((x, y));
        }
    }
    out
}

/// Concatenated per-listener means of the final hidden-layer activations
/// with emitter at `location`, orientation 0, averaged over ears and a
/// strided (t, f) lattice. Output length = n_listeners * width.
pub fn extract_latent(
    model: &FieldModel,
    location: (f64, f64),
    listeners: &[(f64, f64)],
    t_stride: usize,
    f_stride: usize,
) -> Result<Vec<f64>> {
    if t_stride == 0 || f_stride == 0 {
        return Err(NafError::InvalidConfig("strides must be positive".into()));
    }
    let width = model.config.width;
    let emitter = model.scale_position(location);
    let mut out = Vec::with_capacity(listeners.len() * width);
    for &q in listeners {
        let listener = model.scale_position(q);
        let mut batch = ForwardBatch::default();
        for ear in 0..2 {
            for t in (0..model.meta.n_time).step_by(t_stride) {
                for f in (0..model.meta.n_freq).step_by(f_stride) {
                    batch.listener.push(listener);
                    batch.emitter.push(emitter);
                    batch.orientation.push(0);
                    batch.ear.push(ear);
                    batch.t.push(model.scale_time(t));
                    batch.f.push(model.scale_freq(f));
                }
            }
        }
        let (_, hidden) = model.forward(&batch)?;
        let rows = batch.len();
        for unit in 0..width {
            let mut acc = 0.0;
            for r in 0..rows {
                acc += hidden[r * width + unit];
            }
            out.push(acc / rows as f64);
        }
    }
    Ok(out)
}

/// MFCC configuration for the probe baseline: non-overlapping frames keep
/// the flattened feature near 500 dimensions for second-long IRs.
pub fn mfcc_probe_stft() -> StftConfig {
    StftConfig {
        fft_size: 512,
        hop: 512,
        window: "hann".into(),
    }
}

/// MFCC baseline feature: nearest-neighbor IR at (emitter=location,
/// listener=q_i, orientation 0), MFCCs averaged over ears, flattened and
/// concatenated over listeners.
pub fn mfcc_feature(
    records: &[ImpulseResponseRecord],
    train: &[usize],
    sample_rate: u32,
    location: (f64, f64),
    listeners: &[(f64, f64)],
) -> Result<Vec<f64>> {
    let cfg = mfcc_probe_stft();
    let mut out = Vec::new();
    for &q in listeners {
        let query = Pose {
            emitter: location,
            listener: q,
            orientation: 0,
        };
        let idx = nearest_ir(records, train, &query)?;
        let rec = &records[idx];
        let a = mfcc(&rec.channels[0], sample_rate, &cfg, MFCC_N_COEFF, MFCC_N_MELS)?;
        let b = mfcc(&rec.channels[1], sample_rate, &cfg, MFCC_N_COEFF, MFCC_N_MELS)?;
        for (ra, rb) in a.iter().zip(&b) {
            for (va, vb) in ra.iter().zip(rb) {
                out.push((va + vb) / 2.0);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda_used: f64,
    /// Set when the λ=0 system was singular and was refit at λ=1e-6.
    pub retried: bool,
}

impl LinearProbe {
    pub fn predict(&self, features: &[f64]) -> f64 {
        self.bias
            + self
                .weights
                .iter()
                .zip(features)
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }
}

fn solve_ridge(features: &[Vec<f64>], targets: &[f64], lambda: f64) -> Option<LinearProbe> {
    let n = features.len();
    let d = features[0].len();
    // Augmented design [X 1]; the bias column is not regularized.
    let a = DMatrix::from_fn(n, d + 1, |r, c| if c < d { features[r][c] } else { 1.0 });
    let y = DVector::from_row_slice(targets);
    let mut m = a.transpose() * &a;
    for i in 0..d {
        m[(i, i)] += lambda;
    }
    let rhs = a.transpose() * y;
    let beta = m.cholesky()?.solve(&rhs);
    Some(LinearProbe {
        weights: beta.as_slice()[..d].to_vec(),
        bias: beta[d],
        lambda_used: lambda,
        retried: false,
    })
}

/// Closed-form ridge least squares with a bias term. A singular system at
/// λ=0 is retried at λ=1e-6 and flagged.
pub fn fit_linear_probe(
    features: &[Vec<f64>],
    targets: &[f64],
    lambda: f64,
) -> Result<LinearProbe> {
    if features.len() < 2 || features.len() != targets.len() {
        return Err(NafError::InvalidInput(format!(
            "need >= 2 consistent points, got {} features / {} targets",
            features.len(),
            targets.len()
        )));
    }
    let d = features[0].len();
    if features.iter().any(|f| f.len() != d) {
        return Err(NafError::InvalidInput("ragged feature rows".into()));
    }
    if features
        .iter()
        .flatten()
        .chain(targets.iter())
        .any(|v| !v.is_finite())
    {
        return Err(NafError::InvalidInput("non-finite probe inputs".into()));
    }
    if lambda < 0.0 {
        return Err(NafError::InvalidConfig(format!("negative ridge λ {lambda}")));
    }
    if let Some(probe) = solve_ridge(features, targets, lambda) {
        return Ok(probe);
    }
    if lambda == 0.0 {
        if let Some(mut probe) = solve_ridge(features, targets, 1e-6) {
            probe.retried = true;
            return Ok(probe);
        }
    }
    Err(NafError::EstimationFailure(
        "ridge normal equations singular".into(),
    ))
}

/// EV = 1 - Var(y - yhat) / Var(y).
pub fn probe_explained_variance(
    probe: &LinearProbe,
    features: &[Vec<f64>],
    targets: &[f64],
) -> Result<f64> {
    if targets.len() < 2 || features.len() != targets.len() {
        return Err(NafError::InvalidInput("need >= 2 test points".into()));
    }
    let n = targets.len() as f64;
    let mean_y = targets.iter().sum::<f64>() / n;
    let var_y = targets.iter().map(|y| (y - mean_y) * (y - mean_y)).sum::<f64>() / n;
    if var_y == 0.0 {
        return Err(NafError::EstimationFailure(
            "constant targets have no variance to explain".into(),
        ));
    }
    let resid: Vec<f64> = features
        .iter()
        .zip(targets)
        .map(|(f, y)| y - probe.predict(f))
        .collect();
    let mean_r = resid.iter().sum::<f64>() / n;
    let var_r = resid.iter().map(|r| (r - mean_r) * (r - mean_r)).sum::<f64>() / n;
    Ok(1.0 - var_r / var_y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Test lattice spacing in meters.
    pub lattice_spacing: f64,
    /// Training points as a fraction of the test count.
    pub train_ratio: f64,
    pub ridge_lambda: f64,
    pub seed: u64,
    /// (t, f) subsampling strides used when averaging latents.
    pub t_stride: usize,
    pub f_stride: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            lattice_spacing: 0.1,
            train_ratio: 0.1,
            ridge_lambda: DEFAULT_RIDGE_LAMBDA,
            seed: 0,
            t_stride: 1,
            f_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub x: f64,
    pub y: f64,
    pub target: f64,
    pub naf_prediction: f64,
    pub mfcc_prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub naf_explained_variance: f64,
    pub mfcc_explained_variance: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub ridge_lambda: f64,
    pub retried: bool,
    pub rows: Vec<ProbeRow>,
}

impl ProbeReport {
    /// CSV of `x,y,target,prediction` using the NAF probe's predictions.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("x,y,target,prediction\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:.4},{:.4},{:.6},{:.6}\n",
                r.x, r.y, r.target, r.naf_prediction
            ));
        }
        std::fs::write(path, out).map_err(|e| NafError::io(path, e))
    }
}

/// Wall-distance probing protocol: test points on a regular interior
/// lattice, training points sampled uniformly at `train_ratio` of the test
/// count, one linear probe per feature family (NAF latents vs MFCC).
pub fn probe_wall_distance(
    model: &FieldModel,
    manifest: &DatasetManifest,
    records: &[ImpulseResponseRecord],
    cfg: &ProbeConfig,
) -> Result<ProbeReport> {
    let scene = &manifest.scene;
    if cfg.lattice_spacing <= 0.0 {
        return Err(NafError::InvalidConfig("lattice spacing must be positive".into()));
    }
    let mut test_points = Vec::new();
    let mut x = cfg.lattice_spacing / 2.0;
    while x < scene.width {
        let mut y = cfg.lattice_spacing / 2.0;
        while y < scene.depth {
            if scene.contains(x, y) {
                test_points.push((x, y));
            }
            y += cfg.lattice_spacing;
        }
        x += cfg.lattice_spacing;
    }
    if test_points.len() < 3 {
        return Err(NafError::InvalidConfig(
            "probe lattice too coarse for this scene".into(),
        ));
    }
    let n_train = ((cfg.train_ratio * test_points.len() as f64).round() as usize).max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut train_points = Vec::with_capacity(n_train);
    while train_points.len() < n_train {
        let px = rng.gen_range(0.0..scene.width);
        let py = rng.gen_range(0.0..scene.depth);
        if scene.contains(px, py) {
            train_points.push((px, py));
        }
    }
    let listeners = fixed_listeners(scene, cfg.seed.wrapping_add(1), N_PROBE_LISTENERS);
    let train_records = manifest.train_indices();

    let featurize = |points: &[(f64, f64)]| -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>)> {
        let naf: Vec<Result<Vec<f64>>> = exec::map_indexed(points.len(), |i| {
            extract_latent(model, points[i], &listeners, cfg.t_stride, cfg.f_stride)
        });
        let naf = naf.into_iter().collect::<Result<Vec<_>>>()?;
        let mut mf = Vec::with_capacity(points.len());
        let mut targets = Vec::with_capacity(points.len());
        for &p in points {
            mf.push(mfcc_feature(
                records,
                &train_records,
                manifest.sample_rate,
                p,
                &listeners,
            )?);
            targets.push(scene.wall_distance(p.0, p.1)?);
        }
        Ok((naf, mf, targets))
    };

    let (naf_train, mfcc_train, y_train) = featurize(&train_points)?;
    let (naf_test, mfcc_test, y_test) = featurize(&test_points)?;

    let naf_probe = fit_linear_probe(&naf_train, &y_train, cfg.ridge_lambda)?;
    let mfcc_probe = fit_linear_probe(&mfcc_train, &y_train, cfg.ridge_lambda)?;
    let naf_ev = probe_explained_variance(&naf_probe, &naf_test, &y_test)?;
    let mfcc_ev = probe_explained_variance(&mfcc_probe, &mfcc_test, &y_test)?;

    let rows = test_points
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| ProbeRow {
            x,
            y,
            target: y_test[i],
            naf_prediction: naf_probe.predict(&naf_test[i]),
            mfcc_prediction: mfcc_probe.predict(&mfcc_test[i]),
        })
        .collect();
    Ok(ProbeReport {
        naf_explained_variance: naf_ev,
        mfcc_explained_variance: mfcc_ev,
        n_train: train_points.len(),
        n_test: test_points.len(),
        ridge_lambda: cfg.ridge_lambda,
        retried: naf_probe.retried || mfcc_probe.retried,
        rows,
    })
}

/// Scores on the top-2 principal components plus the (orthonormal)
/// components themselves, rows = points.
pub fn pca_2d(data: &[Vec<f64>]) -> Result<(Vec<(f64, f64)>, [Vec<f64>; 2])> {
    if data.len() < 3 {
        return Err(NafError::InvalidInput(format!(
            "PCA export needs >= 3 points, got {}",
            data.len()
        )));
    }
    let d = data[0].len();
    if data.iter().any(|r| r.len() != d) || d < 2 {
        return Err(NafError::InvalidInput("ragged or <2-D latents".into()));
    }
    let n = data.len();
    let mut mean = vec![0.0f64; d];
    for row in data {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let centered = DMatrix::from_fn(n, d, |r, c| data[r][c] - mean[c]);
    let svd = centered.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let scores: Vec<(f64, f64)> = (0..n)
        .map(|r| {
            (
                u[(r, 0)] * svd.singular_values[0],
                u[(r, 1)] * svd.singular_values[1],
            )
        })
        .collect();
    let components = [
        vt.row(0).iter().copied().collect::<Vec<f64>>(),
        vt.row(1).iter().copied().collect::<Vec<f64>>(),
    ];
    Ok((scores, components))
}

/// CSV export of latents reduced to their top-2 principal components:
/// `x,y,room_label`.
pub fn tsne_export(latents: &[Vec<f64>], labels: &[String], path: &Path) -> Result<()> {
    if latents.len() != labels.len() {
        return Err(NafError::InvalidInput(
            "latent/label counts differ".into(),
        ));
    }
    let (scores, _) = pca_2d(latents)?;
    let mut out = String::from("x,y,room_label\n");
    for ((x, y), label) in scores.iter().zip(labels) {
        out.push_str(&format!("{x:.6},{y:.6},{label}\n"));
    }
    std::fs::write(path, out).map_err(|e| NafError::io(path, e))
}
