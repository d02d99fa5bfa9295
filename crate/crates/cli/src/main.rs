use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use reno_core::codec::{bench, decode_with, encode_file, DecodeOptions, Header};
use reno_core::io::{read_points, write_atomic, write_points, PointFormat};
use reno_core::metrics::distortion;
use reno_core::nn::AdamConfig;
use reno_core::synth::{gen_scan, ScanConfig};
use reno_core::top::{train, TrainConfig, TrainSample};
use reno_core::{dequantize, quantize, CodingMode, PointCloud, TopConfig, TopParamsF32};

/// Learned multiscale occupancy codec for point cloud geometry.
#[derive(Parser)]
#[command(name = "reno", version)]
struct Cli {
    /// Print machine-readable JSON reports on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a point cloud file.
    Encode(EncodeArgs),
    /// Decompress a bitstream to a point cloud file.
    Decode(DecodeArgs),
    /// Train a model on point cloud files or synthetic scans.
    Train(TrainArgs),
    /// Distortion between a reference and a test cloud.
    Eval(EvalArgs),
    /// Time encoding and decoding per pipeline stage.
    Bench(BenchArgs),
    /// Write synthetic scans to a directory.
    GenData(GenDataArgs),
    /// Describe a model file.
    Info(ModelArg),
}

#[derive(Args)]
struct ModelArg {
    /// Parameter file; the built-in untrained (c32,k3) model when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Bits per axis of the voxel grid.
    #[arg(long, default_value_t = 12)]
    depth: u8,
    /// Code each occupancy byte as one 255-ary symbol.
    #[arg(long)]
    one_stage: bool,
    #[command(flatten)]
    model: ModelArg,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Output format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Fail instead of warning when the stream names another model.
    #[arg(long)]
    strict_model: bool,
    #[command(flatten)]
    model: ModelArg,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Format {
    Ply,
    PlyAscii,
    Xyz,
}

#[derive(Args)]
#[group(id = "source", required = true, multiple = false)]
struct Source {
    /// Directory of .ply/.xyz files.
    #[arg(long, group = "source")]
    data: Option<PathBuf>,
    /// JSON synthetic data set description (see `gen-data`).
    #[arg(long, group = "source")]
    synthetic: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 5000)]
    steps: usize,
    #[arg(long, default_value_t = 5e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 12)]
    depth: u8,
    #[arg(long, default_value_t = 32)]
    channels: usize,
    #[arg(long, default_value_t = 3)]
    kernel_size: usize,
    /// Leave out the 255-ary single-stage head.
    #[arg(long)]
    no_one_stage: bool,
    /// Number of clouds held out from the end of the set for evaluation.
    #[arg(long, default_value_t = 0)]
    heldout: usize,
    #[arg(long, default_value_t = 1000)]
    eval_interval: usize,
    /// Continue from an existing parameter file.
    #[arg(long)]
    init: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = 59.70)]
    peak: f64,
}

#[derive(Args)]
struct BenchArgs {
    /// Point cloud file; a synthetic scan when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    depth: u8,
    #[arg(long, default_value_t = 3)]
    repeat: usize,
    #[command(flatten)]
    model: ModelArg,
}

#[derive(Args)]
struct GenDataArgs {
    /// JSON data set description; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// A numbered series of synthetic scans.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
struct SyntheticSet {
    count: usize,
    first_seed: u64,
    scan: ScanConfig,
}

impl Default for SyntheticSet {
    fn default() -> Self {
        Self {
            count: 64,
            first_seed: 0,
            scan: ScanConfig::default(),
        }
    }
}

impl SyntheticSet {
    fn load(path: Option<&Path>) -> Result<Self, String> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    fn scans(&self) -> impl Iterator<Item = (u64, PointCloud)> + '_ {
        (0..self.count as u64).map(|i| {
            let seed = self.first_seed + i;
            (seed, gen_scan(&ScanConfig { seed, ..self.scan }))
        })
    }
}

type Outcome = Result<(), String>;

fn load_model(arg: &ModelArg) -> Result<TopParamsF32, String> {
    match &arg.model {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
            TopParamsF32::from_bytes(&bytes).map_err(|e| format!("{}: {e}", path.display()))
        }
        None => Ok(TopParamsF32::init(TopConfig::default(), 0)),
    }
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) {
    if json {
        println!(
            "{}",
            serde_json::to_string(value).expect("reports serialize")
        );
    } else {
        println!("{}", text());
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn cmd_encode(a: &EncodeArgs, json: bool) -> Outcome {
    let params = load_model(&a.model)?;
    let pc = read_points(&a.input).map_err(|e| format!("{}: {e}", a.input.display()))?;
    let mode = if a.one_stage {
        CodingMode::OneStage
    } else {
        CodingMode::TwoStage
    };
    let (bytes, summary) = encode_file(&pc, a.depth, &params, mode).map_err(err)?;
    write_atomic(&a.output, &bytes).map_err(err)?;
    emit(json, &summary, || {
        format!(
            "{} points -> {} voxels, {} bytes, {:.4} bpp",
            summary.points, summary.voxels, summary.bytes, summary.bpp
        )
    });
    Ok(())
}

fn cmd_decode(a: &DecodeArgs, json: bool) -> Outcome {
    let params = load_model(&a.model)?;
    let bytes = std::fs::read(&a.input).map_err(|e| format!("{}: {e}", a.input.display()))?;
    let options = DecodeOptions {
        strict_model: a.strict_model,
        ..DecodeOptions::default()
    };
    let header = Header::parse(&bytes).map_err(err)?;
    if header.model_id != params.model_id() && !a.strict_model {
        eprintln!(
            "warning: stream was encoded with model {:016x}, decoding with {:016x}",
            header.model_id,
            params.model_id()
        );
    }
    let (g, t, summary) = decode_with(&bytes, &params, &options).map_err(err)?;
    let pc = dequantize(&g, &t).map_err(err)?;
    let format = match a.format {
        Some(Format::Ply) => PointFormat::PlyBinary,
        Some(Format::PlyAscii) => PointFormat::PlyAscii,
        Some(Format::Xyz) => PointFormat::Xyz,
        None => PointFormat::from_path(&a.output),
    };
    write_points(&pc, &a.output, format).map_err(err)?;
    emit(json, &summary, || {
        format!("{} voxels at depth {}", summary.voxels, summary.depth)
    });
    Ok(())
}

fn point_files(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("ply" | "xyz" | "txt")
            )
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(format!("{}: no .ply or .xyz files", dir.display()));
    }
    Ok(files)
}

#[derive(Serialize)]
struct TrainSummary {
    samples: usize,
    heldout: usize,
    steps: usize,
    seconds: f64,
    skipped_steps: u64,
    final_train_bpp: Option<f64>,
    checkpoints: Vec<reno_core::top::Checkpoint>,
    model: reno_core::top::ModelInfo,
}

fn cmd_train(a: &TrainArgs, json: bool) -> Outcome {
    let start = Instant::now();
    let k = a.kernel_size;
    let prepare = |pc: &PointCloud| -> Result<TrainSample, String> {
        let (g, _) = quantize(pc, a.depth).map_err(err)?;
        TrainSample::from_geometry(&g, k).map_err(err)
    };
    let mut samples = Vec::new();
    if let Some(dir) = &a.source.data {
        for f in point_files(dir)? {
            let pc = read_points(&f).map_err(|e| format!("{}: {e}", f.display()))?;
            samples.push(prepare(&pc)?);
        }
    } else {
        for (_, pc) in SyntheticSet::load(a.source.synthetic.as_deref())?.scans() {
            samples.push(prepare(&pc)?);
        }
    }
    if a.heldout >= samples.len() {
        return Err(format!(
            "{} held-out clouds leave nothing to train on",
            a.heldout
        ));
    }
    let heldout = samples.split_off(samples.len() - a.heldout);

    let params = match &a.init {
        Some(path) => load_model(&ModelArg {
            model: Some(path.clone()),
        })?,
        None => {
            if k.is_multiple_of(2) || a.channels == 0 {
                return Err(format!("invalid architecture c{} k{k}", a.channels));
            }
            TopParamsF32::init(
                TopConfig {
                    channels: a.channels,
                    kernel_size: k,
                    one_stage_head: !a.no_one_stage,
                },
                a.seed,
            )
        }
    };
    if params.config.kernel_size != k {
        return Err(format!(
            "--kernel-size {k} does not match the initial model"
        ));
    }
    let config = TrainConfig {
        steps: a.steps,
        adam: AdamConfig {
            lr: a.lr,
            ..AdamConfig::default()
        },
        seed: a.seed,
        eval_interval: a.eval_interval,
        ..TrainConfig::default()
    };
    let report = train(params, &samples, &heldout, &config, |cp| {
        let held = match (cp.heldout_bpp, cp.heldout_uniform_bpp) {
            (Some(h), Some(u)) => format!(", held-out {h:.4} bpp (uniform {u:.4})"),
            _ => String::new(),
        };
        eprintln!("step {}: train {:.4} bpp{held}", cp.step, cp.train_bpp);
    })
    .map_err(err)?;
    write_atomic(&a.out, &report.params.to_bytes()).map_err(err)?;
    let summary = TrainSummary {
        samples: samples.len(),
        heldout: heldout.len(),
        steps: a.steps,
        seconds: start.elapsed().as_secs_f64(),
        skipped_steps: report.skipped_steps,
        final_train_bpp: report.checkpoints.last().map(|c| c.train_bpp),
        checkpoints: report.checkpoints,
        model: report.params.info(),
    };
    emit(json, &summary, || {
        format!(
            "trained {} steps on {} clouds in {:.1} s, model {} written to {}",
            summary.steps,
            summary.samples,
            summary.seconds,
            summary.model.model_id,
            a.out.display()
        )
    });
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Outcome {
    let reference =
        read_points(&a.reference).map_err(|e| format!("{}: {e}", a.reference.display()))?;
    let test = read_points(&a.test).map_err(|e| format!("{}: {e}", a.test.display()))?;
    let report = distortion(&reference, &test, a.peak).map_err(err)?;
    emit(true, &report, String::new);
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Outcome {
    let params = load_model(&a.model)?;
    let pc = match &a.input {
        Some(path) => read_points(path).map_err(|e| format!("{}: {e}", path.display()))?,
        None => gen_scan(&ScanConfig::default()),
    };
    let report = bench(&pc, a.depth, &params, a.repeat).map_err(err)?;
    emit(true, &report, String::new);
    Ok(())
}

fn cmd_gen_data(a: &GenDataArgs, json: bool) -> Outcome {
    let set = SyntheticSet::load(a.config.as_deref())?;
    std::fs::create_dir_all(&a.out).map_err(|e| format!("{}: {e}", a.out.display()))?;
    let mut files = Vec::new();
    for (seed, pc) in set.scans() {
        let path = a.out.join(format!("scan_{seed:06}.ply"));
        write_points(&pc, &path, PointFormat::PlyBinary).map_err(err)?;
        files.push(path);
    }
    emit(json, &files, || {
        format!("wrote {} scans to {}", files.len(), a.out.display())
    });
    Ok(())
}

fn cmd_info(a: &ModelArg, json: bool) -> Outcome {
    let info = load_model(a)?.info();
    emit(json, &info, || {
        format!(
            "c{} k{}{}: {} parameters ({} bytes), model id {}",
            info.channels,
            info.kernel_size,
            if info.one_stage_head {
                " +one-stage"
            } else {
                ""
            },
            info.parameter_count,
            info.parameter_bytes,
            info.model_id
        )
    });
    Ok(())
}

fn configure_threads() -> Outcome {
    let Ok(value) = std::env::var("RENO_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("RENO_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Encode(a) => cmd_encode(a, cli.json),
        Command::Decode(a) => cmd_decode(a, cli.json),
        Command::Train(a) => cmd_train(a, cli.json),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
        Command::GenData(a) => cmd_gen_data(a, cli.json),
        Command::Info(a) => cmd_info(a, cli.json),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
