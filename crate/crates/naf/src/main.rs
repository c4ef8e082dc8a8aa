//! Command-line entry point. Every command writes a resolved-config JSON
//! next to its primary output, exits 0 on success and prints a one-line
//! `category: message` diagnostic on failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use naf::analysis::{
    ablation_curve, evaluate, probe_wall_distance, EvalMethod, EvalOptions, ProbeConfig,
};
use naf::baselines::{codec_record_bytes, storage_report};
use naf::dataset::{read_dataset, read_manifest};
use naf::dsp::convolve;
use naf::error::{NafError, Result};
use naf::field::{
    load_model, render_ir, render_loudness_map, save_model, train, GridMode, ModelConfig,
    TrainConfig,
};
use naf::geom::Pose;
use naf::roomsim::{build_dataset, load_scene, DatasetConfig};
use naf::wav::{read_wav, write_wav, WavData};

#[derive(Parser)]
#[command(name = "naf", version, about = "Neural acoustic fields on simulated room impulse responses")]
struct Cli {
    /// Worker threads (0 = number of processors). Falls back to NAF_WORKERS.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset container from a scene description.
    GenData(GenDataArgs),
    /// Train a field model on a dataset.
    Train(TrainArgs),
    /// Score methods on a dataset split.
    Eval(EvalArgs),
    /// Render a loudness map for a fixed emitter.
    RenderMap(RenderMapArgs),
    /// Convolve dry audio with a rendered binaural impulse response.
    Auralize(AuralizeArgs),
    /// Linear probing of wall distance from model latents.
    Probe(ProbeArgs),
    /// Exact storage accounting per method.
    ReportStorage(ReportStorageArgs),
    /// Training-set-size ablation across grid modes.
    Ablate(AblateArgs),
}

#[derive(Args, Serialize)]
struct GenDataArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Probe lattice spacing in meters.
    #[arg(long, default_value_t = 0.5)]
    spacing: f64,
    /// Image-source reflection order.
    #[arg(long, default_value_t = 20)]
    order: u32,
    #[arg(long, default_value_t = 16000)]
    sr: u32,
    /// IR duration in seconds.
    #[arg(long, default_value_t = 0.5)]
    dur: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of pose combinations kept.
    #[arg(long, default_value_t = 1.0)]
    subsample: f64,
    #[arg(long, default_value_t = 0.1)]
    test_fraction: f64,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSON file with a TrainConfig; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "shared")]
    grid_mode: String,
    /// desk (4x128) or paper (8x512).
    #[arg(long, default_value = "desk")]
    scale: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    irs_per_batch: Option<usize>,
    #[arg(long)]
    coords_per_ir: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Comma-separated: naf,nearest,linear,codec (codec expands to
    /// codec+nearest and codec+linear), or the expanded names.
    #[arg(long, default_value = "naf,nearest,linear")]
    methods: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    bits: u8,
    /// Evaluate on the training split instead of the held-out one.
    #[arg(long, default_value_t = false)]
    train_split: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct RenderMapArgs {
    #[arg(long)]
    model: PathBuf,
    /// Emitter position "X,Y" in meters.
    #[arg(long)]
    emitter: String,
    /// Cell resolution in meters.
    #[arg(long)]
    res: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    pgm: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct AuralizeArgs {
    #[arg(long)]
    model: PathBuf,
    /// "EX,EY,LX,LY,ORIENT".
    #[arg(long)]
    pose: String,
    #[arg(long, name = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct ProbeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV of probe targets and predictions per test point.
    #[arg(long)]
    latents: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    spacing: f64,
    #[arg(long, default_value_t = 1)]
    t_stride: usize,
    #[arg(long, default_value_t = 1)]
    f_stride: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct ReportStorageArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    bits: u8,
}

#[derive(Args, Serialize)]
struct AblateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "0.1,0.25,0.5,1.0")]
    fractions: String,
    /// Comma-separated grid modes: any of shared, dual, none.
    #[arg(long, default_value = "shared,none")]
    modes: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "desk")]
    scale: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
}

fn main() {
    let cli = Cli::parse();
    let workers = cli.workers.or_else(|| {
        std::env::var("NAF_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(w) = workers {
        naf::exec::configure_workers(w);
    }
    if let Err(e) = run(cli.command) {
        eprintln!("{}: {e}", e.category());
        std::process::exit(1);
    }
}

/// Writes the resolved run configuration next to `output`.
fn write_run_json(output: &Path, name: &str, resolved: serde_json::Value) -> Result<()> {
    let run = json!({
        "command": name,
        "code_version": env!("CARGO_PKG_VERSION"),
        "config": resolved,
        "output": output.display().to_string(),
    });
    let path = if output.is_dir() {
        output.join("run.json")
    } else {
        let stem = output
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "run".to_string());
        output.with_file_name(format!("{stem}.run.json"))
    };
    std::fs::write(&path, serde_json::to_string_pretty(&run)?)
        .map_err(|e| NafError::io(&path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| NafError::io(path, e))
}

fn parse_pair(s: &str, what: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(NafError::InvalidConfig(format!(
            "{what} must be \"X,Y\", got {s:?}"
        )));
    }
    let x = parts[0]
        .trim()
        .parse()
        .map_err(|_| NafError::InvalidConfig(format!("bad {what} component {:?}", parts[0])))?;
    let y = parts[1]
        .trim()
        .parse()
        .map_err(|_| NafError::InvalidConfig(format!("bad {what} component {:?}", parts[1])))?;
    Ok((x, y))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| NafError::InvalidConfig(format!("bad {what} entry {p:?}")))
        })
        .collect()
}

fn model_config(scale: &str, grid_mode: GridMode) -> Result<ModelConfig> {
    match scale {
        "desk" => Ok(ModelConfig::desk(grid_mode)),
        "paper" => Ok(ModelConfig::paper(grid_mode)),
        other => Err(NafError::InvalidConfig(format!(
            "unknown scale {other:?} (expected desk or paper)"
        ))),
    }
}

fn load_train_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        None => Ok(TrainConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| NafError::io(p, e))?;
            serde_json::from_str(&text)
                .map_err(|e| NafError::InvalidConfig(format!("{}: {e}", p.display())))
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData(args) => {
            let scene = load_scene(&args.scene)?;
            let cfg = DatasetConfig {
                probe_spacing: args.spacing,
                max_order: args.order,
                sample_rate: args.sr,
                ir_duration: args.dur,
                subsample: args.subsample,
                test_fraction: args.test_fraction,
                seed: args.seed,
                ..DatasetConfig::default()
            };
            let (manifest, records) = build_dataset(&scene, &cfg)?;
            naf::dataset::write_dataset(&manifest, &records, &args.out)?;
            write_run_json(&args.out, "gen-data", serde_json::to_value(&cfg)?)?;
            println!(
                "wrote {} records ({} train / {} test) to {}",
                manifest.n_records,
                manifest.n_records - manifest.test_indices.len(),
                manifest.test_indices.len(),
                args.out.display()
            );
            Ok(())
        }
        Command::Train(args) => {
            let grid_mode: GridMode = args.grid_mode.parse()?;
            let mc = model_config(&args.scale, grid_mode)?;
            let mut tc = load_train_config(args.config.as_deref())?;
            if let Some(v) = args.seed {
                tc.seed = v;
            }
            if let Some(v) = args.epochs {
                tc.epochs = v;
            }
            if let Some(v) = args.irs_per_batch {
                tc.irs_per_batch = v;
            }
            if let Some(v) = args.coords_per_ir {
                tc.coords_per_ir = v;
            }
            if let Some(v) = args.lr {
                tc.lr = v;
            }
            let (manifest, records) = read_dataset(&args.data)?;
            let (model, report) = train(&manifest, &records, mc.clone(), &tc)?;
            let bytes = save_model(&model, &args.out)?;
            // Train's run record keeps the canonical `run.json` name.
            let run_path = args
                .out
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join("run.json");
            let run = json!({
                "command": "train",
                "code_version": env!("CARGO_PKG_VERSION"),
                "model_config": mc,
                "train_config": tc,
                "data": args.data.display().to_string(),
                "model_bytes": bytes,
                "final_loss": report.final_loss,
                "epoch_loss": report.epoch_loss,
                "n_parameters": report.n_parameters,
            });
            std::fs::write(&run_path, serde_json::to_string_pretty(&run)?)
                .map_err(|e| NafError::io(&run_path, e))?;
            println!(
                "trained {} params, final loss {:.6}, wrote {} ({} bytes)",
                report.n_parameters,
                report.final_loss,
                args.out.display(),
                bytes
            );
            Ok(())
        }
        Command::Eval(args) => {
            let mut methods = Vec::new();
            for name in args.methods.split(',') {
                match name.trim() {
                    "codec" => {
                        methods.push(EvalMethod::CodecNearest);
                        methods.push(EvalMethod::CodecLinear);
                    }
                    other => methods.push(other.parse()?),
                }
            }
            let model = match &args.model {
                Some(p) => Some(load_model(p)?),
                None => None,
            };
            let (manifest, records) = read_dataset(&args.data)?;
            let opts = EvalOptions {
                codec_bits: args.bits,
                split_train: args.train_split,
                seed: args.seed,
                ..EvalOptions::default()
            };
            let report = evaluate(&manifest, &records, &methods, model.as_ref(), &opts)?;
            write_json(&args.out, &report)?;
            write_run_json(&args.out, "eval", serde_json::to_value(&args)?)?;
            print!("{}", report.text_table());
            Ok(())
        }
        Command::RenderMap(args) => {
            let model = load_model(&args.model)?;
            let emitter = parse_pair(&args.emitter, "emitter")?;
            let map = render_loudness_map(&model, emitter, args.res, args.seed)?;
            map.write_csv(&args.out)?;
            if let Some(pgm) = &args.pgm {
                map.write_pgm(pgm)?;
            }
            write_run_json(&args.out, "render-map", serde_json::to_value(&args)?)?;
            println!(
                "rendered {}x{} loudness map to {}",
                map.n_cols,
                map.n_rows,
                args.out.display()
            );
            Ok(())
        }
        Command::Auralize(args) => {
            let model = load_model(&args.model)?;
            let parts: Vec<f64> = parse_list(&args.pose, "pose")?;
            if parts.len() != 5 {
                return Err(NafError::InvalidConfig(
                    "pose must be \"EX,EY,LX,LY,ORIENT\"".into(),
                ));
            }
            let pose = Pose {
                emitter: (parts[0], parts[1]),
                listener: (parts[2], parts[3]),
                orientation: parts[4] as usize,
            };
            let dry = read_wav(&args.input)?;
            let ir = render_ir(&model, &pose, args.seed)?;
            let mut wet = Vec::with_capacity(2);
            for ear in 0..2 {
                // Mono dry audio feeds both ears; stereo stays per-channel.
                let channel = &dry.channels[ear.min(dry.channels.len() - 1)];
                let out = convolve(channel, &ir[ear])?;
                wet.push(out.iter().map(|&x| x as f32).collect::<Vec<f32>>());
            }
            let report = write_wav(
                &args.out,
                &WavData {
                    channels: wet,
                    sample_rate: dry.sample_rate,
                },
            )?;
            write_run_json(&args.out, "auralize", serde_json::to_value(&args)?)?;
            println!(
                "wrote {} (peak {:.4}{})",
                args.out.display(),
                report.peak,
                if report.clipped { ", clipped" } else { "" }
            );
            Ok(())
        }
        Command::Probe(args) => {
            let model = load_model(&args.model)?;
            let (manifest, records) = read_dataset(&args.data)?;
            let cfg = ProbeConfig {
                lattice_spacing: args.spacing,
                t_stride: args.t_stride,
                f_stride: args.f_stride,
                seed: args.seed,
                ..ProbeConfig::default()
            };
            let report = probe_wall_distance(&model, &manifest, &records, &cfg)?;
            write_json(&args.out, &report)?;
            if let Some(csv) = &args.latents {
                report.write_csv(csv)?;
            }
            write_run_json(&args.out, "probe", serde_json::to_value(&args)?)?;
            println!(
                "probe EV: naf {:.4}, mfcc {:.4} ({} train / {} test points)",
                report.naf_explained_variance,
                report.mfcc_explained_variance,
                report.n_train,
                report.n_test
            );
            Ok(())
        }
        Command::ReportStorage(args) => {
            let manifest = read_manifest(&args.data)?;
            let codec_bytes =
                9 + 2 * manifest.n_records as u64
                    * codec_record_bytes(manifest.n_samples, args.bits) as u64;
            let report = storage_report(&args.data, args.model.as_deref(), Some(codec_bytes))?;
            write_json(&args.out, &report)?;
            write_run_json(&args.out, "report-storage", serde_json::to_value(&args)?)?;
            for (method, bytes) in &report.per_method {
                println!("{method:<10} {bytes} bytes");
            }
            Ok(())
        }
        Command::Ablate(args) => {
            let fractions: Vec<f64> = parse_list(&args.fractions, "fractions")?;
            let modes: Vec<GridMode> = args
                .modes
                .split(',')
                .map(|m| match m.trim() {
                    // Fig.-5 style shorthand: "grid" = the shared grid model.
                    "grid" => Ok(GridMode::Shared),
                    other => other.parse(),
                })
                .collect::<Result<_>>()?;
            let base = model_config(&args.scale, GridMode::Shared)?;
            let mut tc = load_train_config(args.config.as_deref())?;
            if let Some(v) = args.seed {
                tc.seed = v;
            }
            if let Some(v) = args.epochs {
                tc.epochs = v;
            }
            let (manifest, records) = read_dataset(&args.data)?;
            let rows = ablation_curve(&manifest, &records, &fractions, &modes, &base, &tc)?;
            write_json(&args.out, &rows)?;
            write_run_json(&args.out, "ablate", serde_json::to_value(&args)?)?;
            for row in &rows {
                println!(
                    "fraction {:>5.2} mode {:<8} n_train {:>5} test loss {:.4}",
                    row.fraction, row.mode, row.n_train, row.test_loss
                );
            }
            Ok(())
        }
    }
}
