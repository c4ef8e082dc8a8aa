//! The neural acoustic field: a conditioned MLP mapping
//! (listener, emitter, orientation, ear, time, frequency) to one normalized
//! log-magnitude spectrogram value, with optional latent-grid conditioning.

mod render;
mod serialize;
mod train;

pub use render::{render_ir, render_loudness_map, render_spectrogram, LoudnessMap};
pub use serialize::{load_model, save_model, MODEL_MAGIC};
pub use train::{train, train_subset, TrainConfig, TrainReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, TensorId};
use crate::dsp::{NormStats, StftConfig};
use crate::error::{NafError, Result};

pub const SIGMA_FLOOR: f64 = 1e-3;
pub const LEAKY_SLOPE: f64 = 0.1;
/// Init scale for latent grid features. Kept small (but nonzero, so every
/// parameter group sees a gradient from step one) because queries far from
/// any training pose read the init values verbatim.
pub const GRID_INIT_STD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    Shared,
    Dual,
    None,
}

impl std::str::FromStr for GridMode {
    type Err = NafError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(GridMode::Shared),
            "dual" => Ok(GridMode::Dual),
            "none" => Ok(GridMode::None),
            other => Err(NafError::InvalidConfig(format!(
                "unknown grid mode {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub grid_mode: GridMode,
    pub n_layers: usize,
    pub width: usize,
    pub grid_dim: usize,
    pub grid_spacing: f64,
    pub sigma_init: f64,
    pub n_freq_enc: usize,
    /// Max frequency exponent for spatial coordinates (2^pos_max_exp).
    pub pos_max_exp: f64,
    /// Max frequency exponent for the time/frequency coordinates.
    pub tf_max_exp: f64,
}

impl ModelConfig {
    /// Small configuration sized for single-machine CPU runs.
    pub fn desk(grid_mode: GridMode) -> Self {
        ModelConfig {
            grid_mode,
            n_layers: 4,
            width: 128,
            grid_dim: 16,
            grid_spacing: 0.5,
            sigma_init: 0.25,
            n_freq_enc: 10,
            pos_max_exp: 7.0,
            tf_max_exp: 10.0,
        }
    }

    /// Full-size configuration: 8 layers of width 512, 64-dim grid features
    /// spaced 0.25 m apart.
    pub fn paper(grid_mode: GridMode) -> Self {
        ModelConfig {
            grid_mode,
            n_layers: 8,
            width: 512,
            grid_dim: 64,
            grid_spacing: 0.25,
            sigma_init: 0.25,
            n_freq_enc: 10,
            pos_max_exp: 7.0,
            tf_max_exp: 10.0,
        }
    }

    /// Six scalar coordinates get sinusoidal encodings; grid features are
    /// prepended for the listener and emitter when enabled.
    pub fn input_dim(&self) -> usize {
        let enc = 6 * 2 * self.n_freq_enc;
        match self.grid_mode {
            GridMode::None => enc,
            _ => enc + 2 * self.grid_dim,
        }
    }

    fn n_grids(&self) -> usize {
        match self.grid_mode {
            GridMode::Shared => 1,
            GridMode::Dual => 2,
            GridMode::None => 0,
        }
    }
}

/// Scene- and dataset-derived constants baked into a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub scene_width: f64,
    pub scene_depth: f64,
    pub sample_rate: u32,
    pub n_samples: usize,
    pub stft: StftConfig,
    pub n_freq: usize,
    pub n_time: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamShape {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroup {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FieldModel {
    pub config: ModelConfig,
    pub meta: ModelMeta,
    pub params: Vec<ParamGroup>,
    pub norm: NormStats,
    /// Lattice positions per grid, derived from the scene bounds.
    pub grid_points: Vec<Vec<(f64, f64)>>,
}

/// One forward batch; positions and (t, f) are in scaled [-1, 1] units.
#[derive(Debug, Clone, Default)]
pub struct ForwardBatch {
    pub listener: Vec<(f64, f64)>,
    pub emitter: Vec<(f64, f64)>,
    pub orientation: Vec<usize>,
    pub ear: Vec<usize>,
    pub t: Vec<f64>,
    pub f: Vec<f64>,
}

impl ForwardBatch {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let n = self.t.len();
        if [
            self.listener.len(),
            self.emitter.len(),
            self.orientation.len(),
            self.ear.len(),
            self.f.len(),
        ]
        .iter()
        .any(|&l| l != n)
        {
            return Err(NafError::InvalidShape {
                op: "forward",
                detail: "batch field lengths differ".into(),
            });
        }
        Ok(())
    }
}

/// [sin(pi w_j x).., cos(pi w_j x)..] with w_j = 2^(j * max_exp / (n-1)).
pub fn sinusoidal_encode(x: f64, n_freq: usize, max_exp: f64, out: &mut Vec<f64>) {
    debug_assert!(n_freq >= 2);
    let start = out.len();
    out.resize(start + 2 * n_freq, 0.0);
    for j in 0..n_freq {
        let omega = (j as f64 * max_exp / (n_freq - 1) as f64).exp2();
        let arg = std::f64::consts::PI * omega * x;
        out[start + j] = arg.sin();
        out[start + n_freq + j] = arg.cos();
    }
}

/// Evenly spaced 1D lattice covering [0, extent] at roughly the requested
/// spacing (endpoints included).
fn lattice_axis(extent: f64, spacing: f64) -> Vec<f64> {
    let n = ((extent / spacing).round() as usize).max(1) + 1;
    (0..n).map(|i| extent * i as f64 / (n - 1) as f64).collect()
}

pub fn grid_lattice(width: f64, depth: f64, spacing: f64) -> Vec<(f64, f64)> {
    let xs = lattice_axis(width, spacing);
    let ys = lattice_axis(depth, spacing);
    let mut pts = Vec::with_capacity(xs.len() * ys.len());
    for &x in &xs {
        for &y in &ys {
            pts.push((x, y));
        }
    }
    pts
}

/// Tape leaf ids for every parameter group, in declaration order.
pub struct ParamLeaves(pub Vec<TensorId>);

impl FieldModel {
    /// Fresh model with seeded initialization: Glorot-uniform weights, zero
    /// biases, normal embeddings with std 1/sqrt(dim), and near-zero grid
    /// features so lattice regions the training poses never exercise stay
    /// neutral instead of injecting init noise at query time.
    pub fn init(config: ModelConfig, meta: ModelMeta, norm: NormStats, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let w = config.width;
        let input_dim = config.input_dim();

        let mut grid_points = Vec::new();
        for g in 0..config.n_grids() {
            let points = grid_lattice(meta.scene_width, meta.scene_depth, config.grid_spacing);
            let p = points.len();
            let dist = Normal::new(0.0, GRID_INIT_STD).unwrap();
            params.push(ParamGroup {
                name: format!("grid{g}.features"),
                shape: vec![p, config.grid_dim],
                values: (0..p * config.grid_dim).map(|_| dist.sample(&mut rng)).collect(),
            });
            params.push(ParamGroup {
                name: format!("grid{g}.bandwidths"),
                shape: vec![p],
                values: vec![config.sigma_init; p],
            });
            grid_points.push(points);
        }

        let mut linear = |name: String, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.push(ParamGroup {
                name: format!("{name}.w"),
                shape: vec![fan_in, fan_out],
                values: (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect(),
            });
            params.push(ParamGroup {
                name: format!("{name}.b"),
                shape: vec![fan_out],
                values: vec![0.0; fan_out],
            });
        };

        for i in 0..config.n_layers {
            let fan_in = if i == 0 { input_dim } else { w };
            linear(format!("layer{i}"), fan_in, w, &mut rng);
        }
        linear("skip0".into(), input_dim, w, &mut rng);
        linear("skip1".into(), w, w, &mut rng);
        linear("head".into(), w, 1, &mut rng);

        let emb_std = 1.0 / (w as f64).sqrt();
        let emb_dist = Normal::new(0.0, emb_std).unwrap();
        for i in 0..config.n_layers - 1 {
            params.push(ParamGroup {
                name: format!("orient_emb{i}"),
                shape: vec![4, w],
                values: (0..4 * w).map(|_| emb_dist.sample(&mut rng)).collect(),
            });
            params.push(ParamGroup {
                name: format!("ear_emb{i}"),
                shape: vec![2, w],
                values: (0..2 * w).map(|_| emb_dist.sample(&mut rng)).collect(),
            });
        }

        FieldModel {
            config,
            meta,
            params,
            norm,
            grid_points,
        }
    }

    pub fn param_index(&self, name: &str) -> usize {
        self.params
            .iter()
            .position(|p| p.name == name)
            .unwrap_or_else(|| panic!("unknown param group {name}"))
    }

    pub fn n_parameters(&self) -> usize {
        self.params.iter().map(|p| p.values.len()).sum()
    }

    /// Registers every parameter group as a tape leaf.
    pub fn leaves(&self, tape: &mut Tape, needs_grad: bool) -> ParamLeaves {
        ParamLeaves(
            self.params
                .iter()
                .map(|p| tape.leaf(p.values.clone(), p.shape.clone(), needs_grad))
                .collect(),
        )
    }

    /// Scene meters -> scaled [-1, 1].
    pub fn scale_position(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (
            2.0 * x / self.meta.scene_width - 1.0,
            2.0 * y / self.meta.scene_depth - 1.0,
        )
    }

    /// Scaled [-1, 1] -> scene meters (grid kernels live in meters).
    pub fn unscale_position(&self, (sx, sy): (f64, f64)) -> (f64, f64) {
        (
            (sx + 1.0) * 0.5 * self.meta.scene_width,
            (sy + 1.0) * 0.5 * self.meta.scene_depth,
        )
    }

    pub fn scale_time(&self, t: usize) -> f64 {
        if self.meta.n_time <= 1 {
            0.0
        } else {
            2.0 * t as f64 / (self.meta.n_time - 1) as f64 - 1.0
        }
    }

    pub fn scale_freq(&self, f: usize) -> f64 {
        if self.meta.n_freq <= 1 {
            0.0
        } else {
            2.0 * f as f64 / (self.meta.n_freq - 1) as f64 - 1.0
        }
    }

    /// Constant (non-learned) part of the input: sinusoidal encodings of
    /// listener, emitter, t and f, row-major [B, 120].
    fn encode_coords(&self, batch: &ForwardBatch) -> Vec<f64> {
        let n_freq = self.config.n_freq_enc;
        let mut out = Vec::with_capacity(batch.len() * 12 * n_freq);
        for i in 0..batch.len() {
            for &(px, py) in [&batch.listener[i], &batch.emitter[i]] {
                sinusoidal_encode(px, n_freq, self.config.pos_max_exp, &mut out);
                sinusoidal_encode(py, n_freq, self.config.pos_max_exp, &mut out);
            }
            sinusoidal_encode(batch.t[i], n_freq, self.config.tf_max_exp, &mut out);
            sinusoidal_encode(batch.f[i], n_freq, self.config.tf_max_exp, &mut out);
        }
        out
    }

    /// Builds the full forward graph on `tape`. Returns (scalar output
    /// column [B,1], last hidden layer activations [B,W]).
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        leaves: &ParamLeaves,
        batch: &ForwardBatch,
    ) -> Result<(TensorId, TensorId)> {
        batch.validate()?;
        let b = batch.len();
        let enc = tape.leaf(
            self.encode_coords(batch),
            vec![b, 12 * self.config.n_freq_enc],
            false,
        );

        let input = match self.config.grid_mode {
            GridMode::None => enc,
            mode => {
                let listener_m: Vec<(f64, f64)> = batch
                    .listener
                    .iter()
                    .map(|&p| self.unscale_position(p))
                    .collect();
                let emitter_m: Vec<(f64, f64)> = batch
                    .emitter
                    .iter()
                    .map(|&p| self.unscale_position(p))
                    .collect();
                let (gl, ge) = match mode {
                    GridMode::Shared => {
                        let f = leaves.0[self.param_index("grid0.features")];
                        let s = leaves.0[self.param_index("grid0.bandwidths")];
                        (
                            tape.grid_query(f, s, &self.grid_points[0], &listener_m)?,
                            tape.grid_query(f, s, &self.grid_points[0], &emitter_m)?,
                        )
                    }
                    GridMode::Dual => {
                        let fl = leaves.0[self.param_index("grid0.features")];
                        let sl = leaves.0[self.param_index("grid0.bandwidths")];
                        let fe = leaves.0[self.param_index("grid1.features")];
                        let se = leaves.0[self.param_index("grid1.bandwidths")];
                        (
                            tape.grid_query(fl, sl, &self.grid_points[0], &listener_m)?,
                            tape.grid_query(fe, se, &self.grid_points[1], &emitter_m)?,
                        )
                    }
                    GridMode::None => unreachable!(),
                };
                tape.concat(&[gl, ge, enc])?
            }
        };

        let fc = |tape: &mut Tape, name: &str, x: TensorId| -> Result<TensorId> {
            let w = leaves.0[self.param_index(&format!("{name}.w"))];
            let bias = leaves.0[self.param_index(&format!("{name}.b"))];
            let y = tape.matmul(x, w)?;
            tape.add_row(y, bias)
        };

        let skip_at = self.config.n_layers / 2 - 1;
        let mut h = input;
        for i in 0..self.config.n_layers {
            h = fc(tape, &format!("layer{i}"), h)?;
            h = tape.leaky_relu(h, LEAKY_SLOPE);
            if i < self.config.n_layers - 1 {
                let orient = leaves.0[self.param_index(&format!("orient_emb{i}"))];
                let ear = leaves.0[self.param_index(&format!("ear_emb{i}"))];
                let oe = tape.gather_rows(orient, batch.orientation.clone())?;
                let ee = tape.gather_rows(ear, batch.ear.clone())?;
                h = tape.add(h, oe)?;
                h = tape.add(h, ee)?;
            }
            if i == skip_at {
                let s = fc(tape, "skip0", input)?;
                let s = tape.leaky_relu(s, LEAKY_SLOPE);
                let s = fc(tape, "skip1", s)?;
                h = tape.add(h, s)?;
            }
        }
        let hidden = h;
        let out = fc(tape, "head", hidden)?;
        Ok((out, hidden))
    }

    /// Inference forward pass: normalized predictions plus last-hidden
    /// activations.
    pub fn forward(&self, batch: &ForwardBatch) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut tape = Tape::new();
        let leaves = self.leaves(&mut tape, false);
        let (out, hidden) = self.forward_tape(&mut tape, &leaves, batch)?;
        Ok((tape.values(out).to_vec(), tape.values(hidden).to_vec()))
    }

    /// The two grid feature vectors supplied for (listener, emitter) in
    /// meters, in that order. Inference-only helper.
    pub fn grid_features(&self, listener: (f64, f64), emitter: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.config.grid_mode == GridMode::None {
            return Err(NafError::InvalidConfig("model has no grid".into()));
        }
        let mut tape = Tape::new();
        let leaves = self.leaves(&mut tape, false);
        let f0 = leaves.0[self.param_index("grid0.features")];
        let s0 = leaves.0[self.param_index("grid0.bandwidths")];
        let (fe, se, pe) = match self.config.grid_mode {
            GridMode::Shared => (f0, s0, &self.grid_points[0]),
            GridMode::Dual => (
                leaves.0[self.param_index("grid1.features")],
                leaves.0[self.param_index("grid1.bandwidths")],
                &self.grid_points[1],
            ),
            GridMode::None => unreachable!(),
        };
        let gl = tape.grid_query(f0, s0, &self.grid_points[0], &[listener])?;
        let ge = tape.grid_query(fe, se, pe, &[emitter])?;
        Ok((tape.values(gl).to_vec(), tape.values(ge).to_vec()))
    }

    /// Rounds every parameter and norm statistic to f32 precision, the
    /// precision of the on-disk format. Done once after training so that
    /// save/load is lossless.
    pub fn snap_to_f32(&mut self) {
        for p in &mut self.params {
            for v in p.values.iter_mut() {
                *v = *v as f32 as f64;
            }
        }
        for v in self.norm.mean.iter_mut() {
            *v = *v as f32 as f64;
        }
        for v in self.norm.std.iter_mut() {
            *v = *v as f32 as f64;
        }
    }

    pub fn normalize(&self, v: f64, f: usize, t: usize) -> f64 {
        let i = f * self.meta.n_time + t;
        (v - self.norm.mean[i]) / (3.0 * self.norm.std[i])
    }

    pub fn denormalize(&self, v_hat: f64, f: usize, t: usize) -> f64 {
        let i = f * self.meta.n_time + t;
        3.0 * self.norm.std[i] * v_hat + self.norm.mean[i]
    }
}
