//! Wall-clock benchmark of the forward operators on synthetic inputs.
//!
//! Inputs are a uniform random image and a flow whose components are drawn
//! from `N(0, 10^2)`. Each configuration is warmed up, then timed over
//! `repetitions` runs; the record carries the median and 95th percentile
//! and a SHA-256 checksum of the output, which must not depend on the
//! worker count.
//!
//! The protocol rows time backward warping and softmax splatting of a
//! 1920x1080x3 frame. The published GPU timings for the same protocol are
//! attached as annotations only.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::grid::{FlowField, ImageGrid, ImportanceMap};
use crate::real::{Precision, Real};
use crate::splat::{Exec, SplatMode};

pub const PROTOCOL_SIZE: (usize, usize) = (1080, 1920);
pub const FLOW_SIGMA: f64 = 10.0;
pub const MIN_REPETITIONS: usize = 5;
const REFERENCE_HARDWARE: &str = "Titan X GPU";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchOp {
    BackwardWarp,
    Splat(SplatMode),
}

impl BenchOp {
    pub const ALL: [BenchOp; 5] = [
        BenchOp::BackwardWarp,
        BenchOp::Splat(SplatMode::Summation),
        BenchOp::Splat(SplatMode::Average),
        BenchOp::Splat(SplatMode::Linear),
        BenchOp::Splat(SplatMode::Softmax),
    ];

    /// Published timing for the 1080p protocol, in milliseconds.
    pub fn reference_ms(self) -> Option<f64> {
        match self {
            BenchOp::BackwardWarp => Some(1.1),
            BenchOp::Splat(SplatMode::Softmax) => Some(3.7),
            _ => None,
        }
    }
}

impl fmt::Display for BenchOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchOp::BackwardWarp => f.write_str("backward-warp"),
            BenchOp::Splat(m) => write!(f, "splat-{m}"),
        }
    }
}

impl FromStr for BenchOp {
    type Err = crate::error::WarpError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        if s == "backward-warp" || s == "backward_warp" || s == "warp" {
            return Ok(BenchOp::BackwardWarp);
        }
        let mode = s.strip_prefix("splat-").unwrap_or(&s);
        mode.parse::<SplatMode>()
            .map(BenchOp::Splat)
            .map_err(|_| invalid(format!("unknown bench op '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// `(height, width)` pairs.
    pub sizes: Vec<(usize, usize)>,
    pub ops: Vec<BenchOp>,
    pub workers: Vec<usize>,
    pub channels: usize,
    pub repetitions: usize,
    pub warmup: usize,
    pub precision: Precision,
    pub seed: u64,
    /// Append the 1080p protocol rows.
    pub protocol: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![(256, 256)],
            ops: BenchOp::ALL.to_vec(),
            workers: vec![default_workers()],
            channels: 3,
            repetitions: MIN_REPETITIONS,
            warmup: 1,
            precision: Precision::Single,
            seed: 0,
            protocol: true,
        }
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hardware {
    pub os: &'static str,
    pub arch: &'static str,
    pub logical_cpus: usize,
    pub cpu_model: Option<String>,
}

impl Hardware {
    pub fn detect() -> Self {
        let cpu_model = std::fs::read_to_string("/proc/cpuinfo").ok().and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        });
        Self {
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            logical_cpus: default_workers(),
            cpu_model,
        }
    }
}

/// One timed configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub op: String,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub workers: usize,
    pub precision: Precision,
    pub repetitions: usize,
    pub median_ms: f64,
    pub p95_ms: f64,
    /// SHA-256 of the little-endian output bytes.
    pub checksum: String,
    pub protocol: bool,
    pub reference_ms: Option<f64>,
    pub reference_hardware: Option<&'static str>,
    pub hardware: Hardware,
}

impl BenchRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("bench records serialize")
    }
}

/// Median of the sorted samples (mean of the middle pair for even counts).
pub fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Nearest-rank 95th percentile of the sorted samples.
pub fn p95(sorted: &[f64]) -> f64 {
    let rank = (0.95 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

struct Inputs<T> {
    image: ImageGrid<T>,
    flow: FlowField<T>,
    z_linear: ImportanceMap<T>,
    z_softmax: ImportanceMap<T>,
}

fn synthetic<T: Real>(h: usize, w: usize, c: usize, seed: u64) -> Result<Inputs<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, FLOW_SIGMA).expect("valid normal");
    let image = (0..h * w * c)
        .map(|_| T::from_f64(rng.random_range(0.0..1.0)))
        .collect();
    let flow = (0..h * w * 2)
        .map(|_| T::from_f64(normal.sample(&mut rng)))
        .collect();
    let z_linear = (0..h * w)
        .map(|_| T::from_f64(rng.random_range(0.5..2.0)))
        .collect();
    let z_softmax = (0..h * w)
        .map(|_| T::from_f64(rng.random_range(-1.0..0.0)))
        .collect();
    Ok(Inputs {
        image: ImageGrid::new(h, w, c, image)?,
        flow: FlowField::new(h, w, flow)?,
        z_linear: ImportanceMap::new(h, w, z_linear)?,
        z_softmax: ImportanceMap::new(h, w, z_softmax)?,
    })
}

fn run_op<T: Real>(exec: &Exec, op: BenchOp, inputs: &Inputs<T>) -> Result<Vec<T>> {
    Ok(match op {
        BenchOp::BackwardWarp => exec.backward_warp(&inputs.image, &inputs.flow)?.into_vec(),
        BenchOp::Splat(mode) => {
            let z = match mode {
                SplatMode::Linear => Some(&inputs.z_linear),
                SplatMode::Softmax => Some(&inputs.z_softmax),
                _ => None,
            };
            let out = exec.splat(&inputs.image, &inputs.flow, mode, z)?;
            let mut v = out.warped.into_vec();
            v.extend(out.weight.into_vec());
            v
        }
    })
}

fn checksum<T: Real>(values: &[T]) -> String {
    let mut hasher = Sha256::new();
    for v in values {
        match T::PRECISION {
            Precision::Single => hasher.update((v.bits() as u32).to_le_bytes()),
            Precision::Double => hasher.update(v.bits().to_le_bytes()),
        }
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn time_config<T: Real>(
    cfg: &BenchConfig,
    op: BenchOp,
    (h, w): (usize, usize),
    workers: usize,
    protocol: bool,
    hardware: &Hardware,
) -> Result<BenchRecord> {
    let exec = Exec::with_workers(workers)?;
    let inputs = synthetic::<T>(h, w, cfg.channels, cfg.seed)?;
    let mut out = Vec::new();
    for _ in 0..cfg.warmup {
        out = run_op(&exec, op, &inputs)?;
    }
    let mut samples = Vec::with_capacity(cfg.repetitions);
    for _ in 0..cfg.repetitions {
        let start = Instant::now();
        out = run_op(&exec, op, &inputs)?;
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    samples.sort_by(f64::total_cmp);
    let reference_ms = if protocol { op.reference_ms() } else { None };
    Ok(BenchRecord {
        op: op.to_string(),
        height: h,
        width: w,
        channels: cfg.channels,
        workers,
        precision: T::PRECISION,
        repetitions: cfg.repetitions,
        median_ms: median(&samples),
        p95_ms: p95(&samples),
        checksum: checksum(&out),
        protocol,
        reference_ms,
        reference_hardware: reference_ms.map(|_| REFERENCE_HARDWARE),
        hardware: hardware.clone(),
    })
}

/// Runs every `(size, op, workers)` combination, then the protocol rows,
/// calling `emit` as each record completes.
pub fn run_bench(
    cfg: &BenchConfig,
    mut emit: impl FnMut(&BenchRecord),
) -> Result<Vec<BenchRecord>> {
    if cfg.repetitions < MIN_REPETITIONS {
        return Err(invalid(format!(
            "need at least {MIN_REPETITIONS} repetitions, got {}",
            cfg.repetitions
        )));
    }
    if cfg.workers.contains(&0) {
        return Err(invalid("worker counts must be positive"));
    }
    if cfg.channels == 0 {
        return Err(invalid("channel count must be positive"));
    }
    let hardware = Hardware::detect();
    let mut plan = Vec::new();
    for &size in &cfg.sizes {
        for &op in &cfg.ops {
            for &workers in &cfg.workers {
                plan.push((op, size, workers, false));
            }
        }
    }
    if cfg.protocol {
        for op in [BenchOp::BackwardWarp, BenchOp::Splat(SplatMode::Softmax)] {
            plan.push((op, PROTOCOL_SIZE, default_workers(), true));
        }
    }
    let mut records = Vec::with_capacity(plan.len());
    for (op, size, workers, protocol) in plan {
        let rec = match cfg.precision {
            Precision::Single => time_config::<f32>(cfg, op, size, workers, protocol, &hardware)?,
            Precision::Double => time_config::<f64>(cfg, op, size, workers, protocol, &hardware)?,
        };
        emit(&rec);
        records.push(rec);
    }
    Ok(records)
}
