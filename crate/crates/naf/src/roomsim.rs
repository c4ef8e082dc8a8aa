//! Image-source impulse-response generator for shoebox rooms with optional
//! occluder culling. This is the ground-truth oracle and dataset factory.
//!
//! Image sources are indexed per axis by an integer n whose absolute value
//! is the number of reflections on that axis; a source exists for every
//! lattice point with |nx|+|ny|+|nz| <= max_order.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    split_dataset, DatasetManifest, ImpulseResponseRecord, FORMAT_VERSION,
};
use crate::dsp::StftConfig;
use crate::error::{NafError, Result};
use crate::exec;
use crate::geom::{orientation_radians, Pose, SceneGeometry};

pub const SPEED_OF_SOUND: f64 = 343.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    pub position: (f64, f64, f64),
    /// Product of wall reflection coefficients sqrt(1 - absorption);
    /// the 1/distance spreading factor is applied at render time.
    pub amplitude: f64,
    pub reflection_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub max_order: u32,
    pub sample_rate: u32,
    pub n_samples: usize,
    /// Ear distance from the listener center, perpendicular to facing.
    /// Zero disables binaural offsets (both ears coincide).
    pub ear_offset: f64,
    pub ear_height: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            max_order: 20,
            sample_rate: 16000,
            n_samples: 8000,
            ear_offset: 0.09,
            ear_height: 1.5,
        }
    }
}

/// 1D image coordinate for axis index n: even n mirrors preserve the
/// emitter offset, odd n flip it.
fn image_coord(n: i64, extent: f64, emitter: f64) -> f64 {
    if n % 2 == 0 {
        n as f64 * extent + emitter
    } else {
        (n + 1) as f64 * extent - emitter
    }
}

/// Difference image(emitter) - listener along one axis, computed so that
/// swapping emitter and listener negates (even n, with n -> -n) or
/// preserves (odd n) the value bit-exactly.
fn image_diff(n: i64, extent: f64, emitter: f64, listener: f64) -> f64 {
    if n % 2 == 0 {
        n as f64 * extent + (emitter - listener)
    } else {
        (n + 1) as f64 * extent - (emitter + listener)
    }
}

/// Reflection gain along one axis: lo/hi wall coefficients raised to the
/// per-wall hit counts of image index n.
fn axis_gain(n: i64, refl_lo: f64, refl_hi: f64) -> f64 {
    let k = n.unsigned_abs() as u32;
    let (hits_hi, hits_lo) = if n % 2 == 0 {
        (k / 2, k / 2)
    } else if n > 0 {
        ((k + 1) / 2, k / 2)
    } else {
        (k / 2, (k + 1) / 2)
    };
    refl_lo.powi(hits_lo as i32) * refl_hi.powi(hits_hi as i32)
}

fn reflection_coeffs(scene: &SceneGeometry) -> [f64; 6] {
    let mut r = [0.0; 6];
    for (i, &a) in scene.absorption.iter().enumerate() {
        r[i] = (1.0 - a).sqrt();
    }
    r
}

/// All image sources of an emitter strictly inside the room, up to
/// max_order total reflections.
pub fn enumerate_image_sources(
    scene: &SceneGeometry,
    emitter: (f64, f64, f64),
    max_order: u32,
) -> Result<Vec<ImageSource>> {
    scene.validate()?;
    let (ex, ey, ez) = emitter;
    if !scene.contains(ex, ey) || !(ez > 0.0 && ez < scene.height) {
        return Err(NafError::InvalidInput(format!(
            "emitter ({ex},{ey},{ez}) not strictly inside room"
        )));
    }
    let k = max_order as i64;
    let r = reflection_coeffs(scene);
    let mut sources = Vec::new();
    for nx in -k..=k {
        for ny in -(k - nx.abs())..=(k - nx.abs()) {
            let rem = k - nx.abs() - ny.abs();
            for nz in -rem..=rem {
                let gain = axis_gain(nx, r[0], r[1])
                    * axis_gain(ny, r[2], r[3])
                    * axis_gain(nz, r[4], r[5]);
                sources.push(ImageSource {
                    position: (
                        image_coord(nx, scene.width, ex),
                        image_coord(ny, scene.depth, ey),
                        image_coord(nz, scene.height, ez),
                    ),
                    amplitude: gain,
                    reflection_count: (nx.abs() + ny.abs() + nz.abs()) as u32,
                });
            }
        }
    }
    Ok(sources)
}

/// Renders one binaural IR. Channel 0 is the left ear (listener +
/// ear_offset perpendicular to facing), channel 1 the right.
pub fn simulate_ir(
    scene: &SceneGeometry,
    emitter: (f64, f64),
    listener: (f64, f64),
    orientation: usize,
    cfg: &SimConfig,
) -> Result<ImpulseResponseRecord> {
    scene.validate()?;
    let pose = Pose {
        emitter,
        listener,
        orientation,
    };
    pose.validate(scene)?;
    if !(cfg.ear_height > 0.0 && cfg.ear_height < scene.height) {
        return Err(NafError::InvalidConfig(format!(
            "ear_height {} outside room height",
            cfg.ear_height
        )));
    }

    let theta = orientation_radians(orientation);
    let (perp_x, perp_y) = (-theta.sin(), theta.cos());
    let ears = [
        (
            listener.0 + cfg.ear_offset * perp_x,
            listener.1 + cfg.ear_offset * perp_y,
        ),
        (
            listener.0 - cfg.ear_offset * perp_x,
            listener.1 - cfg.ear_offset * perp_y,
        ),
    ];

    let mut channels = [Vec::new(), Vec::new()];
    for (ear_xy, out) in ears.iter().zip(channels.iter_mut()) {
        *out = render_ear(scene, emitter, *ear_xy, cfg)?;
    }
    Ok(ImpulseResponseRecord {
        pose,
        channels,
        sample_rate: cfg.sample_rate,
    })
}

fn render_ear(
    scene: &SceneGeometry,
    emitter: (f64, f64),
    ear: (f64, f64),
    cfg: &SimConfig,
) -> Result<Vec<f32>> {
    let k = cfg.max_order as i64;
    let r = reflection_coeffs(scene);
    let sr = cfg.sample_rate as f64;

    // Direct path must land inside the buffer.
    let direct = {
        let dx = emitter.0 - ear.0;
        let dy = emitter.1 - ear.1;
        (dx * dx + dy * dy).sqrt()
    };
    if direct < 1e-9 {
        return Err(NafError::InvalidInput(
            "emitter and ear coincide (1/d singular)".into(),
        ));
    }
    let direct_sample = direct / SPEED_OF_SOUND * sr;
    if direct_sample as usize + 1 >= cfg.n_samples {
        return Err(NafError::InvalidConfig(format!(
            "n_samples {} too short for direct path at sample {direct_sample:.1}",
            cfg.n_samples
        )));
    }

    let has_occluders = !scene.occluders.is_empty();
    // (sample index, tap value) pairs; sorted before accumulation so the
    // sum order is independent of enumeration order and scheduling.
    let mut taps: Vec<(usize, f64)> = Vec::new();
    for nx in -k..=k {
        let gx = axis_gain(nx, r[0], r[1]);
        let dx = image_diff(nx, scene.width, emitter.0, ear.0);
        for ny in -(k - nx.abs())..=(k - nx.abs()) {
            let gy = axis_gain(ny, r[2], r[3]);
            let dy = image_diff(ny, scene.depth, emitter.1, ear.1);
            if has_occluders {
                let img = (
                    image_coord(nx, scene.width, emitter.0),
                    image_coord(ny, scene.depth, emitter.1),
                );
                if scene.occluded(img.0, img.1, ear.0, ear.1) {
                    continue;
                }
            }
            let rem = k - nx.abs() - ny.abs();
            for nz in -rem..=rem {
                let gz = axis_gain(nz, r[4], r[5]);
                let dz = image_diff(nz, scene.height, cfg.ear_height, cfg.ear_height);
                let d = (dx * dx + dy * dy + dz * dz).sqrt();
                if d < 1e-9 {
                    continue;
                }
                let amp = gx * gy * gz / d;
                let delay = d / SPEED_OF_SOUND * sr;
                let i0 = delay.floor() as usize;
                let frac = delay - delay.floor();
                if i0 < cfg.n_samples {
                    taps.push((i0, amp * (1.0 - frac)));
                }
                if i0 + 1 < cfg.n_samples {
                    taps.push((i0 + 1, amp * frac));
                }
            }
        }
    }
    taps.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut ir = vec![0.0f64; cfg.n_samples];
    for (i, v) in taps {
        ir[i] += v;
    }
    Ok(ir.into_iter().map(|x| x as f32).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub probe_spacing: f64,
    pub max_order: u32,
    pub sample_rate: u32,
    pub ir_duration: f64,
    /// Fraction of all (emitter, listener, orientation) combinations kept.
    pub subsample: f64,
    pub test_fraction: f64,
    pub seed: u64,
    pub ear_offset: f64,
    pub stft: StftConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            probe_spacing: 0.5,
            max_order: 20,
            sample_rate: 16000,
            ir_duration: 0.5,
            subsample: 1.0,
            test_fraction: 0.1,
            seed: 0,
            ear_offset: 0.09,
            stft: StftConfig::default(),
        }
    }
}

/// Regular probe lattice inset from the walls by spacing/2.
pub fn probe_lattice(scene: &SceneGeometry, spacing: f64) -> Vec<(f64, f64)> {
    let axis = |extent: f64| -> Vec<f64> {
        let mut v = Vec::new();
        let mut x = spacing / 2.0;
        while x <= extent - spacing / 2.0 + 1e-9 {
            v.push(x);
            x += spacing;
        }
        v
    };
    let xs = axis(scene.width);
    let ys = axis(scene.depth);
    let mut probes = Vec::with_capacity(xs.len() * ys.len());
    for &x in &xs {
        for &y in &ys {
            probes.push((x, y));
        }
    }
    probes
}

/// Simulates a full dataset: probes on a lattice, one record per sampled
/// (emitter, listener, orientation) combination, deterministic for a fixed
/// config. Records are simulated in parallel but ordered by index.
pub fn build_dataset(
    scene: &SceneGeometry,
    cfg: &DatasetConfig,
) -> Result<(DatasetManifest, Vec<ImpulseResponseRecord>)> {
    scene.validate()?;
    if !(cfg.probe_spacing > 0.0
        && cfg.probe_spacing < scene.width
        && cfg.probe_spacing < scene.depth)
    {
        return Err(NafError::InvalidConfig(format!(
            "probe_spacing {} must be positive and smaller than the room extent",
            cfg.probe_spacing
        )));
    }
    let probes = probe_lattice(scene, cfg.probe_spacing);
    if probes.is_empty() {
        return Err(NafError::InvalidConfig("no probes fit the room".into()));
    }
    if !(cfg.subsample > 0.0 && cfg.subsample <= 1.0) {
        return Err(NafError::InvalidConfig(format!(
            "subsample {} outside (0,1]",
            cfg.subsample
        )));
    }

    let mut combos = Vec::new();
    for (ei, &e) in probes.iter().enumerate() {
        for (li, &l) in probes.iter().enumerate() {
            if ei == li {
                continue; // coincident pair has a singular 1/d direct path
            }
            for orientation in 0..4 {
                combos.push((e, l, orientation));
            }
        }
    }
    let n_keep = ((cfg.subsample * combos.len() as f64).round() as usize)
        .clamp(2.min(combos.len()), combos.len());
    if n_keep < 2 {
        return Err(NafError::InvalidConfig(
            "subsample leaves fewer than 2 records".into(),
        ));
    }
    let kept: Vec<(
        (f64, f64),
        (f64, f64),
        usize,
    )> = if n_keep == combos.len() {
        combos
    } else {
        let mut idx: Vec<usize> = (0..combos.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
        idx.shuffle(&mut rng);
        let mut pick: Vec<usize> = idx[..n_keep].to_vec();
        pick.sort_unstable();
        pick.into_iter().map(|i| combos[i]).collect()
    };

    let n_samples = (cfg.ir_duration * cfg.sample_rate as f64).ceil() as usize;
    let sim = SimConfig {
        max_order: cfg.max_order,
        sample_rate: cfg.sample_rate,
        n_samples,
        ear_offset: cfg.ear_offset,
        ear_height: (scene.height / 2.0).min(1.5),
    };
    let results = exec::map_indexed(kept.len(), |i| {
        let (e, l, orientation) = kept[i];
        simulate_ir(scene, e, l, orientation, &sim)
    });
    let mut records = Vec::with_capacity(results.len());
    for r in results {
        records.push(r?);
    }

    let (_train, test) = split_dataset(records.len(), cfg.test_fraction, cfg.seed)?;
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        sample_rate: cfg.sample_rate,
        n_samples,
        n_records: records.len(),
        fft_size: cfg.stft.fft_size,
        hop: cfg.stft.hop,
        window: cfg.stft.window.clone(),
        split_seed: cfg.seed,
        test_indices: test,
        scene: scene.clone(),
    };
    Ok((manifest, records))
}

/// Loads a scene description from a JSON file matching the manifest's
/// `scene` object.
pub fn load_scene(path: &Path) -> Result<SceneGeometry> {
    let json = std::fs::read_to_string(path).map_err(|e| NafError::io(path, e))?;
    let scene: SceneGeometry =
        serde_json::from_str(&json).map_err(|e| NafError::Decode(format!("scene json: {e}")))?;
    scene.validate()?;
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Occluder;

    fn room() -> SceneGeometry {
        SceneGeometry::shoebox(5.0, 4.0, 3.0, 0.3)
    }

    fn mono_cfg(order: u32) -> SimConfig {
        SimConfig {
            max_order: order,
            ear_offset: 0.0,
            ..SimConfig::default()
        }
    }

    fn energy(ir: &[f32]) -> f64 {
        ir.iter().map(|&x| x as f64 * x as f64).sum()
    }

    #[test]
    fn order_zero_is_single_source() {
        let sources = enumerate_image_sources(&room(), (1.0, 1.0, 1.5), 0).unwrap();
        assert_eq!(sources.len(), 1);
        assert_eq!(sources[0].position, (1.0, 1.0, 1.5));
        assert_eq!(sources[0].amplitude, 1.0);
        assert_eq!(sources[0].reflection_count, 0);
    }

    #[test]
    fn order_one_has_seven_sources() {
        // Lattice points with |nx|+|ny|+|nz| <= 1.
        let sources = enumerate_image_sources(&room(), (1.0, 1.0, 1.5), 1).unwrap();
        assert_eq!(sources.len(), 7);
        assert_eq!(
            sources.iter().filter(|s| s.reflection_count == 1).count(),
            6
        );
    }

    #[test]
    fn lossless_walls_have_unit_gain() {
        let scene = SceneGeometry::shoebox(5.0, 4.0, 3.0, 0.0);
        let sources = enumerate_image_sources(&scene, (2.0, 2.0, 1.0), 3).unwrap();
        assert!(sources.iter().all(|s| s.amplitude == 1.0));
    }

    #[test]
    fn emitter_on_boundary_is_error() {
        assert!(enumerate_image_sources(&room(), (0.0, 1.0, 1.5), 1).is_err());
        assert!(enumerate_image_sources(&room(), (1.0, 1.0, 3.0), 1).is_err());
    }

    #[test]
    fn direct_path_arrival_and_amplitude() {
        // Hand computation: d = sqrt(13) m, delay = d/343*16000 = 168.2
        // samples, total arrival amplitude 1/d split across two taps.
        let rec = simulate_ir(&room(), (1.0, 1.0), (4.0, 3.0), 0, &mono_cfg(0)).unwrap();
        let ir = &rec.channels[0];
        let d = 13.0f64.sqrt();
        let delay = d / SPEED_OF_SOUND * 16000.0;
        let i0 = delay.floor() as usize;
        assert_eq!(i0, 168);
        let arrival = ir[i0] as f64 + ir[i0 + 1] as f64;
        assert!((arrival - 1.0 / d).abs() < 1e-6);
        assert!(ir[..i0].iter().all(|&x| x == 0.0));
        // Fractional split proportions.
        let frac = delay - i0 as f64;
        assert!((ir[i0] as f64 - (1.0 - frac) / d).abs() < 1e-6);
        assert!((ir[i0 + 1] as f64 - frac / d).abs() < 1e-6);
    }

    #[test]
    fn reciprocity_bit_exact_without_ear_offset() {
        let cfg = mono_cfg(6);
        let a = simulate_ir(&room(), (1.3, 1.7), (3.9, 2.2), 1, &cfg).unwrap();
        let b = simulate_ir(&room(), (3.9, 2.2), (1.3, 1.7), 1, &cfg).unwrap();
        assert_eq!(a.channels, b.channels);
    }

    #[test]
    fn absorption_monotonicity() {
        let cfg = mono_cfg(4);
        let lively = SceneGeometry::shoebox(5.0, 4.0, 3.0, 0.2);
        let damped = SceneGeometry::shoebox(5.0, 4.0, 3.0, 0.6);
        let a = simulate_ir(&lively, (1.0, 1.0), (4.0, 3.0), 0, &cfg).unwrap();
        let b = simulate_ir(&damped, (1.0, 1.0), (4.0, 3.0), 0, &cfg).unwrap();
        assert!(energy(&b.channels[0]) < energy(&a.channels[0]));
    }

    #[test]
    fn order_zero_energy_decreases_with_distance() {
        let cfg = mono_cfg(0);
        let near = simulate_ir(&room(), (1.0, 1.0), (2.0, 1.0), 0, &cfg).unwrap();
        let far = simulate_ir(&room(), (1.0, 1.0), (4.5, 3.5), 0, &cfg).unwrap();
        assert!(energy(&far.channels[0]) < energy(&near.channels[0]));
    }

    #[test]
    fn full_occluder_blocks_direct_path() {
        let mut scene = room();
        scene.occluders.push(Occluder {
            x0: 2.5,
            y0: 0.0,
            x1: 2.5,
            y1: 4.0,
        });
        let rec = simulate_ir(&scene, (1.0, 2.0), (4.0, 2.0), 0, &mono_cfg(0)).unwrap();
        assert!(rec.channels[0].iter().all(|&x| x == 0.0));
        assert!(rec.channels[1].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn too_short_buffer_is_config_error() {
        let cfg = SimConfig {
            n_samples: 10,
            ..mono_cfg(0)
        };
        assert!(matches!(
            simulate_ir(&room(), (1.0, 1.0), (4.0, 3.0), 0, &cfg),
            Err(NafError::InvalidConfig(_))
        ));
    }

    #[test]
    fn probe_lattice_count() {
        let scene = room();
        let probes = probe_lattice(&scene, 1.0);
        assert_eq!(probes.len(), 20); // 5 x 4 inset lattice
        assert!(probes.iter().all(|&(x, y)| scene.contains(x, y)));
    }

    #[test]
    fn dataset_determinism() {
        let scene = room();
        let cfg = DatasetConfig {
            probe_spacing: 1.5,
            max_order: 2,
            ir_duration: 0.1,
            subsample: 0.05,
            ..DatasetConfig::default()
        };
        let (m1, r1) = build_dataset(&scene, &cfg).unwrap();
        let (m2, r2) = build_dataset(&scene, &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(r1, r2);
        assert!(r1.len() >= 2);
        for rec in &r1 {
            assert!(scene.contains(rec.pose.emitter.0, rec.pose.emitter.1));
            assert!(scene.contains(rec.pose.listener.0, rec.pose.listener.1));
        }
    }

    #[test]
    fn dataset_rejects_oversized_spacing() {
        let cfg = DatasetConfig {
            probe_spacing: 10.0,
            ..DatasetConfig::default()
        };
        assert!(build_dataset(&room(), &cfg).is_err());
    }
}
