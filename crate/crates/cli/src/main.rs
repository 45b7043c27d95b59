//! `softsplat` command-line tool.
//!
//! Settings resolve as command-line flag, then `SOFTSPLAT_*` environment
//! variable, then built-in default. Reports (`gradcheck`, `sweep`, `bench`,
//! `interpolate`, `make-scene`) are written to stdout as one JSON object per
//! line. Any failure prints a single `softsplat: error: ...` line to stderr
//! and exits with a nonzero status.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use softsplat::bench::{run_bench, BenchConfig, BenchOp};
use softsplat::io::{
    read_flo, read_image, read_importance, write_flo, write_image, write_importance, BitDepth,
};
use softsplat::oracle::gradcheck::{
    check_random_instances, CheckedOp, GradCheckConfig, DEFAULT_STEP, DEFAULT_TOLERANCE,
};
use softsplat::pipeline::{sweep_times, Importance};
use softsplat::{
    make_scene, scale_flow, Exec, FlowField, ImageGrid, ImportanceMap, InterpolationRequest,
    MetricParams, Precision, Real, SceneKind, SplatMode, WarpError,
};

type Result<T, E = WarpError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(
    name = "softsplat",
    version,
    about = "Differentiable forward warping (softmax splatting) tools"
)]
struct Cli {
    /// Worker threads for the parallel kernels [default: all cores].
    #[arg(long, global = true, env = "SOFTSPLAT_WORKERS")]
    workers: Option<usize>,

    /// Arithmetic precision [default: double for gradcheck, single otherwise].
    #[arg(long, global = true, env = "SOFTSPLAT_PRECISION")]
    precision: Option<Precision>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Splat one image along a flow field.
    Warp(WarpArgs),
    /// Synthesize intermediate frames between two frames.
    Interpolate(InterpolateArgs),
    /// Interpolate k/steps for k = 1..steps-1 and report per-frame statistics.
    Sweep(SweepArgs),
    /// Check every analytic backward pass against finite differences.
    Gradcheck(GradcheckArgs),
    /// Time the forward operators on synthetic N(0, 10^2) flows.
    Bench(BenchArgs),
    /// Write a synthetic scene with exact flows and ground truth.
    MakeScene(MakeSceneArgs),
}

#[derive(Debug, Args)]
struct ModeArgs {
    #[arg(long, env = "SOFTSPLAT_MODE", default_value = "softmax")]
    mode: SplatMode,

    /// Scale of the brightness-constancy importance metric.
    #[arg(long, env = "SOFTSPLAT_ALPHA", default_value_t = -1.0, allow_negative_numbers = true)]
    alpha: f64,
}

#[derive(Debug, Args)]
struct WarpArgs {
    #[command(flatten)]
    mode: ModeArgs,
    #[arg(long)]
    flow: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Importance map (single-channel PFM).
    #[arg(long, conflicts_with = "auto_z")]
    z: Option<PathBuf>,
    /// Derive the importance map by brightness constancy against --target.
    #[arg(long, requires = "target")]
    auto_z: bool,
    /// The frame the flow points to, used by --auto-z.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Splat along t * flow.
    #[arg(long, env = "SOFTSPLAT_T", default_value_t = 1.0)]
    t: f64,
    /// Also write the splat weight map as PFM.
    #[arg(long)]
    weight_out: Option<PathBuf>,
    #[arg(long, default_value_t = 8, value_parser = parse_depth)]
    bit_depth: u8,
}

#[derive(Debug, Args)]
struct FramePair {
    #[arg(long)]
    i0: PathBuf,
    #[arg(long)]
    i1: PathBuf,
    #[arg(long)]
    flow01: PathBuf,
    #[arg(long)]
    flow10: PathBuf,
}

#[derive(Debug, Args)]
struct InterpolateArgs {
    #[command(flatten)]
    frames: FramePair,
    #[command(flatten)]
    mode: ModeArgs,
    /// Comma-separated times in (0, 1).
    #[arg(
        long,
        env = "SOFTSPLAT_T",
        value_delimiter = ',',
        default_value = "0.5"
    )]
    t: Vec<f64>,
    /// Importance maps for the two sides instead of the metric (PFM).
    #[arg(long, requires = "z1")]
    z0: Option<PathBuf>,
    #[arg(long, requires = "z0")]
    z1: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    mode: ModeArgs,
    #[arg(long, default_value_t = 32)]
    steps: usize,
    /// Directory of ground-truth PNGs, one per step, in file-name order.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Sweep a generated scene (scored against its ground truth) instead of files.
    #[arg(long, conflicts_with_all = ["i0", "i1", "flow01", "flow10"])]
    scene: Option<SceneKind>,
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 32.0, allow_negative_numbers = true)]
    shift: f64,
    #[arg(long, requires_all = ["i1", "flow01", "flow10"])]
    i0: Option<PathBuf>,
    #[arg(long)]
    i1: Option<PathBuf>,
    #[arg(long)]
    flow01: Option<PathBuf>,
    #[arg(long)]
    flow10: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    /// Comma-separated subset of summation, average, linear, softmax, brightness_constancy.
    #[arg(long, value_delimiter = ',')]
    ops: Vec<CheckedOp>,
    #[arg(long, env = "SOFTSPLAT_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 4)]
    size: usize,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Comma-separated HEIGHTxWIDTH sizes.
    #[arg(long, value_delimiter = ',', default_value = "256x256", value_parser = parse_size)]
    sizes: Vec<(usize, usize)>,
    /// Comma-separated operators (backward-warp, splat-summation, ...) [default: all].
    #[arg(long, value_delimiter = ',')]
    ops: Vec<BenchOp>,
    /// Comma-separated worker counts to compare [default: --workers or all cores].
    #[arg(long = "worker-counts", value_delimiter = ',')]
    worker_counts: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip the 1920x1080 protocol rows.
    #[arg(long)]
    no_protocol: bool,
}

#[derive(Debug, Args)]
struct MakeSceneArgs {
    #[arg(long)]
    kind: SceneKind,
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 8.0, allow_negative_numbers = true)]
    shift: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn parse_depth(s: &str) -> Result<u8, String> {
    match s {
        "8" => Ok(8),
        "16" => Ok(16),
        _ => Err(format!("bit depth must be 8 or 16, got '{s}'")),
    }
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("size '{s}' is not HEIGHTxWIDTH"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| format!("size '{s}' is not HEIGHTxWIDTH"))
    };
    Ok((parse(h)?, parse(w)?))
}

fn invalid(msg: impl Into<String>) -> WarpError {
    WarpError::InvalidArgument(msg.into())
}

fn exec_for(workers: Option<usize>) -> Result<Exec> {
    match workers {
        Some(n) => Exec::with_workers(n),
        None => Ok(Exec::default()),
    }
}

fn depth(bits: u8) -> BitDepth {
    if bits == 16 {
        BitDepth::Sixteen
    } else {
        BitDepth::Eight
    }
}

fn io_fail(path: &Path, e: std::io::Error) -> WarpError {
    WarpError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn emit(value: impl serde::Serialize) {
    println!(
        "{}",
        serde_json::to_string(&value).expect("report records serialize")
    );
}

/// Formats `t` for file names: `0.5` becomes `0.500000`.
fn t_label(t: f64) -> String {
    format!("{t:.6}")
}

fn load_flow<T: Real>(path: &Path) -> Result<FlowField<T>> {
    Ok(read_flo(path)?.cast())
}

fn warp<T: Real>(exec: &Exec, args: &WarpArgs) -> Result<()> {
    let image: ImageGrid<T> = read_image(&args.input)?;
    let flow = load_flow::<T>(&args.flow)?;
    let mode = args.mode.mode;
    let params = MetricParams::new(args.mode.alpha)?;
    let z: Option<ImportanceMap<T>> = match (&args.z, args.auto_z, &args.target) {
        (Some(p), _, _) => Some(read_importance(p)?.cast()),
        (None, true, Some(target)) => {
            let target: ImageGrid<T> = read_image(target)?;
            Some(exec.brightness_constancy(&image, &target, &flow, params)?)
        }
        _ => None,
    };
    if mode.requires_importance() && z.is_none() {
        return Err(invalid(format!("{mode} splatting needs --z or --auto-z")));
    }
    if !args.t.is_finite() {
        return Err(invalid(format!("t = {} is not finite", args.t)));
    }
    let flow = if args.t == 1.0 {
        flow
    } else {
        scale_flow(&flow, T::from_f64(args.t))?
    };
    let out = exec.splat(
        &image,
        &flow,
        mode,
        z.as_ref().filter(|_| mode.requires_importance()),
    )?;
    write_image(&out.warped, &args.out, depth(args.bit_depth))?;
    if let Some(p) = &args.weight_out {
        write_importance(&ImportanceMap::from_grid(&out.weight)?, p)?;
    }
    emit(json!({
        "out": args.out,
        "mode": mode,
        "holes": out.hole_count(),
        "pixels": out.weight.len(),
    }));
    Ok(())
}

type Loaded<T> = (ImageGrid<T>, ImageGrid<T>, FlowField<T>, FlowField<T>);

fn load_pair<T: Real>(frames: &FramePair) -> Result<Loaded<T>> {
    Ok((
        read_image(&frames.i0)?,
        read_image(&frames.i1)?,
        load_flow(&frames.flow01)?,
        load_flow(&frames.flow10)?,
    ))
}

fn interpolate<T: Real>(exec: &Exec, args: &InterpolateArgs) -> Result<()> {
    let (i0, i1, flow01, flow10) = load_pair::<T>(&args.frames)?;
    let params = MetricParams::new(args.mode.alpha)?;
    let mut req = InterpolationRequest::new(
        i0,
        i1,
        flow01,
        flow10,
        args.t.clone(),
        args.mode.mode,
        params,
    );
    if let (Some(z0), Some(z1)) = (&args.z0, &args.z1) {
        req.importance = Importance::Supplied {
            z0: read_importance(z0)?.cast(),
            z1: read_importance(z1)?.cast(),
        };
    }
    let outputs = exec.interpolate(&req)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| io_fail(&args.out_dir, e))?;
    for out in outputs {
        let frame_path = args.out_dir.join(format!("frame_t{}.png", t_label(out.t)));
        let hole_path = args.out_dir.join(format!("holes_t{}.png", t_label(out.t)));
        write_image(&out.frame, &frame_path, BitDepth::Eight)?;
        write_image(&out.hole_mask, &hole_path, BitDepth::Eight)?;
        emit(json!({
            "t": out.t,
            "frame": frame_path,
            "hole_mask": hole_path,
            "hole_fraction": out.hole_fraction(),
        }));
    }
    Ok(())
}

fn read_truth_dir<T: Real>(dir: &Path) -> Result<Vec<ImageGrid<T>>> {
    let entries = std::fs::read_dir(dir).map_err(|e| io_fail(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| io_fail(dir, e))?.path();
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        {
            paths.push(path);
        }
    }
    paths.sort();
    paths.iter().map(read_image).collect()
}

fn sweep<T: Real>(exec: &Exec, args: &SweepArgs) -> Result<()> {
    let times = sweep_times(args.steps)?;
    let params = MetricParams::new(args.mode.alpha)?;
    let (req, mut reference) = match (args.scene, &args.i0) {
        (Some(kind), _) => {
            let scene = make_scene(kind, args.size, args.shift)?.cast::<T>();
            // Score against the scene's own truth when it covers every step.
            let truth: Option<Vec<_>> = times.iter().map(|&t| scene.truth_at(t).cloned()).collect();
            let req = InterpolationRequest::new(
                scene.i0,
                scene.i1,
                scene.flow01,
                scene.flow10,
                times,
                args.mode.mode,
                params,
            );
            (req, truth)
        }
        (None, Some(i0)) => {
            let frames = FramePair {
                i0: i0.clone(),
                i1: args.i1.clone().unwrap_or_default(),
                flow01: args.flow01.clone().unwrap_or_default(),
                flow10: args.flow10.clone().unwrap_or_default(),
            };
            let (i0, i1, f01, f10) = load_pair::<T>(&frames)?;
            (
                InterpolationRequest::new(i0, i1, f01, f10, times, args.mode.mode, params),
                None,
            )
        }
        (None, None) => {
            return Err(invalid(
                "sweep needs --scene or --i0/--i1/--flow01/--flow10",
            ))
        }
    };
    if let Some(dir) = &args.truth {
        reference = Some(read_truth_dir(dir)?);
    }
    for rec in exec.temporal_sweep(&req, reference.as_deref())? {
        emit(rec);
    }
    Ok(())
}

fn gradcheck(args: &GradcheckArgs, precision: Precision) -> Result<bool> {
    if precision != Precision::Double {
        return Err(invalid("gradcheck runs in double precision only"));
    }
    let ops = if args.ops.is_empty() {
        CheckedOp::ALL.to_vec()
    } else {
        args.ops.clone()
    };
    let config = GradCheckConfig {
        step: args.step,
        tolerance: args.tolerance,
        seed: args.seed,
    };
    let mut all_passed = true;
    for op in ops {
        let report = check_random_instances(op, args.instances, args.size, args.size, &config)?;
        all_passed &= report.passed;
        emit(&report);
    }
    Ok(all_passed)
}

fn bench(args: &BenchArgs, workers: Option<usize>, precision: Precision) -> Result<()> {
    let mut config = BenchConfig {
        sizes: args.sizes.clone(),
        repetitions: args.reps,
        warmup: args.warmup,
        precision,
        seed: args.seed,
        protocol: !args.no_protocol,
        ..Default::default()
    };
    if !args.ops.is_empty() {
        config.ops = args.ops.clone();
    }
    if !args.worker_counts.is_empty() {
        config.workers = args.worker_counts.clone();
    } else if let Some(n) = workers {
        config.workers = vec![n];
    }
    run_bench(&config, |rec| emit(rec))?;
    Ok(())
}

fn make_scene_cmd(args: &MakeSceneArgs) -> Result<()> {
    let scene = make_scene(args.kind, args.size, args.shift)?;
    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))?;
    write_image(&scene.i0, dir.join("i0.png"), BitDepth::Eight)?;
    write_image(&scene.i1, dir.join("i1.png"), BitDepth::Eight)?;
    write_flo(&scene.flow01, dir.join("flow01.flo"))?;
    write_flo(&scene.flow10, dir.join("flow10.flo"))?;
    let mut truth = Vec::new();
    for (t, frame) in &scene.truth {
        let name = format!("truth_t{}.png", t_label(*t));
        write_image(frame, dir.join(&name), BitDepth::Eight)?;
        truth.push(json!({ "t": t, "file": name }));
    }
    emit(json!({
        "kind": scene.kind,
        "size": args.size,
        "shift": args.shift,
        "dir": dir,
        "truth": truth,
    }));
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    if cli.workers == Some(0) {
        return Err(invalid("--workers must be positive"));
    }
    let single_default = cli.precision.unwrap_or(Precision::Single);
    let exec = || exec_for(cli.workers);
    match &cli.command {
        Command::Warp(a) => match single_default {
            Precision::Single => warp::<f32>(&exec()?, a)?,
            Precision::Double => warp::<f64>(&exec()?, a)?,
        },
        Command::Interpolate(a) => match single_default {
            Precision::Single => interpolate::<f32>(&exec()?, a)?,
            Precision::Double => interpolate::<f64>(&exec()?, a)?,
        },
        Command::Sweep(a) => match single_default {
            Precision::Single => sweep::<f32>(&exec()?, a)?,
            Precision::Double => sweep::<f64>(&exec()?, a)?,
        },
        Command::Gradcheck(a) => return gradcheck(a, cli.precision.unwrap_or(Precision::Double)),
        Command::Bench(a) => bench(a, cli.workers, single_default)?,
        Command::MakeScene(a) => make_scene_cmd(a)?,
    }
    Ok(true)
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            eprintln!("softsplat: {}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("softsplat: error: gradient check failed (see report)");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("softsplat: error: {}", one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
