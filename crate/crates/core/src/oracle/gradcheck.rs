//! Central finite-difference gradient checking.
//!
//! An operation `f` with a random upstream `g` defines the scalar
//! `L(x) = <g, f(x)>`. Every scalar input coordinate `x_i` is probed with
//! `(L(x + h e_i) - L(x - h e_i)) / 2h` and compared with the analytic
//! `dL/dx_i` from the backward pass. The differences `f(x+) - f(x-)` are
//! formed elementwise before contracting with `g`, which keeps outputs that
//! the probe does not touch at exactly zero.
//!
//! The relative error of a coordinate is
//! `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
//!
//! # Seeding
//!
//! Instance `i` of operation tag `k` under base seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s + (k << 32) + i)` (wrapping), and the
//! upstream of every check from `ChaCha8Rng::seed_from_u64(s ^ 0x5eed)`,
//! so failures reproduce across machines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{internal, invalid, Result};
use crate::grid::{FlowField, ImageGrid, ImportanceMap};
use crate::metric::{brightness_constancy, brightness_constancy_backward, MetricParams};
use crate::splat::{splat, splat_backward, SplatMode};

pub const DEFAULT_STEP: f64 = 1e-6;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
const REL_FLOOR: f64 = 1e-8;
/// Minimum distance of a flow's fractional part from the kernel kinks.
pub const KINK_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Source,
    Flow,
    Importance,
    Alpha,
    Frame0,
    Frame1,
}

/// One named input of a probed operation, stored in double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTensor {
    pub kind: InputKind,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl ProbeTensor {
    pub fn from_grid(kind: InputKind, grid: &ImageGrid<f64>) -> Self {
        let (height, width, channels) = grid.shape();
        Self {
            kind,
            height,
            width,
            channels,
            data: grid.as_slice().to_vec(),
        }
    }

    pub fn from_flow(flow: &FlowField<f64>) -> Self {
        Self {
            kind: InputKind::Flow,
            height: flow.height(),
            width: flow.width(),
            channels: 2,
            data: flow.as_slice().to_vec(),
        }
    }

    pub fn from_importance(z: &ImportanceMap<f64>) -> Self {
        Self {
            kind: InputKind::Importance,
            height: z.height(),
            width: z.width(),
            channels: 1,
            data: z.as_slice().to_vec(),
        }
    }

    pub fn scalar(kind: InputKind, value: f64) -> Self {
        Self {
            kind,
            height: 1,
            width: 1,
            channels: 1,
            data: vec![value],
        }
    }

    pub fn to_grid(&self) -> Result<ImageGrid<f64>> {
        ImageGrid::new(self.height, self.width, self.channels, self.data.clone())
    }

    pub fn to_flow(&self) -> Result<FlowField<f64>> {
        FlowField::new(self.height, self.width, self.data.clone())
    }

    pub fn to_importance(&self) -> Result<ImportanceMap<f64>> {
        ImportanceMap::new(self.height, self.width, self.data.clone())
    }

    fn coordinate(&self, i: usize) -> Coordinate {
        let c = i % self.channels;
        let px = i / self.channels;
        Coordinate {
            kind: self.kind,
            y: px / self.width,
            x: px % self.width,
            channel: c,
        }
    }
}

/// A differentiable operation with a flat output.
pub trait GradOp {
    fn name(&self) -> String;
    fn forward(&self, inputs: &[ProbeTensor]) -> Result<Vec<f64>>;
    /// Gradient of `<upstream, forward(inputs)>`, one vector per input.
    fn backward(&self, inputs: &[ProbeTensor], upstream: &[f64]) -> Result<Vec<Vec<f64>>>;
}

/// Location of a probed scalar: pixel, channel and which input it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Coordinate {
    pub kind: InputKind,
    pub y: usize,
    pub x: usize,
    pub channel: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub op_name: String,
    pub max_rel_error: f64,
    pub worst_coordinate: Option<Coordinate>,
    pub num_probes: usize,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    fn empty(op_name: String, tolerance: f64) -> Self {
        Self {
            op_name,
            max_rel_error: 0.0,
            worst_coordinate: None,
            num_probes: 0,
            tolerance,
            passed: true,
        }
    }

    /// Folds another report of the same operation into this one.
    pub fn merge(&mut self, other: &GradCheckReport) {
        if other.max_rel_error > self.max_rel_error || self.worst_coordinate.is_none() {
            self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
            self.worst_coordinate = other.worst_coordinate.or(self.worst_coordinate);
        }
        self.num_probes += other.num_probes;
        self.passed = self.max_rel_error < self.tolerance;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            tolerance: DEFAULT_TOLERANCE,
            seed: 0,
        }
    }
}

/// Compares the analytic gradient of `op` at `inputs` with central differences.
pub fn finite_difference_check(
    op: &dyn GradOp,
    inputs: &[ProbeTensor],
    config: &GradCheckConfig,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-5).contains(&config.step) {
        return Err(invalid(format!(
            "finite-difference step {} outside [1e-7, 1e-5]",
            config.step
        )));
    }
    let base = op.forward(inputs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let upstream: Vec<f64> = (0..base.len())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let analytic = op.backward(inputs, &upstream)?;
    if analytic.len() != inputs.len() {
        return Err(internal(format!(
            "{}: backward returned {} gradients for {} inputs",
            op.name(),
            analytic.len(),
            inputs.len()
        )));
    }

    let mut report = GradCheckReport::empty(op.name(), config.tolerance);
    let mut probe = inputs.to_vec();
    for (t, input) in inputs.iter().enumerate() {
        if analytic[t].len() != input.data.len() {
            return Err(internal(format!(
                "{}: gradient of {:?} has the wrong length",
                op.name(),
                input.kind
            )));
        }
        for i in 0..input.data.len() {
            let x = input.data[i];
            probe[t].data[i] = x + config.step;
            let plus = op.forward(&probe);
            probe[t].data[i] = x - config.step;
            let minus = op.forward(&probe);
            probe[t].data[i] = x;
            let coord = input.coordinate(i);
            let (plus, minus) = match (plus, minus) {
                (Ok(p), Ok(m)) => (p, m),
                (Err(e), _) | (_, Err(e)) => {
                    return Err(internal(format!(
                        "{}: forward failed while probing {coord:?}: {e}",
                        op.name()
                    )))
                }
            };
            let diff: f64 = plus
                .iter()
                .zip(&minus)
                .zip(&upstream)
                .map(|((p, m), g)| (p - m) * g)
                .sum();
            let numeric = diff / (2.0 * config.step);
            if !numeric.is_finite() {
                return Err(internal(format!(
                    "{}: non-finite forward value while probing {coord:?}",
                    op.name()
                )));
            }
            let a = analytic[t][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            report.num_probes += 1;
            if rel > report.max_rel_error || report.worst_coordinate.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst_coordinate = Some(coord);
            }
        }
    }
    report.passed = report.max_rel_error < config.tolerance;
    Ok(report)
}

/// Any splat mode as a probed operation over `[source, flow, (importance)]`.
#[derive(Debug, Clone, Copy)]
pub struct SplatOp {
    pub mode: SplatMode,
}

impl GradOp for SplatOp {
    fn name(&self) -> String {
        format!("splat_{}", self.mode)
    }

    fn forward(&self, inputs: &[ProbeTensor]) -> Result<Vec<f64>> {
        let source = inputs[0].to_grid()?;
        let flow = inputs[1].to_flow()?;
        let z = inputs.get(2).map(ProbeTensor::to_importance).transpose()?;
        Ok(splat(&source, &flow, self.mode, z.as_ref())?
            .warped
            .into_vec())
    }

    fn backward(&self, inputs: &[ProbeTensor], upstream: &[f64]) -> Result<Vec<Vec<f64>>> {
        let source = inputs[0].to_grid()?;
        let flow = inputs[1].to_flow()?;
        let z = inputs.get(2).map(ProbeTensor::to_importance).transpose()?;
        let (h, w, c) = source.shape();
        let up = ImageGrid::new(h, w, c, upstream.to_vec())?;
        let g = splat_backward(&source, &flow, self.mode, z.as_ref(), &up)?;
        let mut out = vec![g.d_source.into_vec(), g.d_flow.into_vec()];
        if let Some(dz) = g.d_importance {
            out.push(dz.into_vec());
        }
        Ok(out)
    }
}

/// Brightness constancy over `[alpha, i0, i1, flow01]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MetricOp;

impl GradOp for MetricOp {
    fn name(&self) -> String {
        "brightness_constancy".to_string()
    }

    fn forward(&self, inputs: &[ProbeTensor]) -> Result<Vec<f64>> {
        let params = MetricParams::new(inputs[0].data[0])?;
        let z = brightness_constancy(
            &inputs[1].to_grid()?,
            &inputs[2].to_grid()?,
            &inputs[3].to_flow()?,
            params,
        )?;
        Ok(z.into_vec())
    }

    fn backward(&self, inputs: &[ProbeTensor], upstream: &[f64]) -> Result<Vec<Vec<f64>>> {
        let params = MetricParams::new(inputs[0].data[0])?;
        let i0 = inputs[1].to_grid()?;
        let up = ImportanceMap::new(i0.height(), i0.width(), upstream.to_vec())?;
        let g = brightness_constancy_backward(
            &i0,
            &inputs[2].to_grid()?,
            &inputs[3].to_flow()?,
            params,
            &up,
        )?;
        Ok(vec![
            vec![g.d_alpha],
            g.d_i0.into_vec(),
            g.d_i1.into_vec(),
            g.d_flow.into_vec(),
        ])
    }
}

/// The five checked backward operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckedOp {
    Summation,
    Average,
    Linear,
    Softmax,
    BrightnessConstancy,
}

impl CheckedOp {
    pub const ALL: [CheckedOp; 5] = [
        CheckedOp::Summation,
        CheckedOp::Average,
        CheckedOp::Linear,
        CheckedOp::Softmax,
        CheckedOp::BrightnessConstancy,
    ];

    fn tag(self) -> u64 {
        self as u64
    }

    pub fn op(self) -> Box<dyn GradOp> {
        match self {
            CheckedOp::Summation => Box::new(SplatOp {
                mode: SplatMode::Summation,
            }),
            CheckedOp::Average => Box::new(SplatOp {
                mode: SplatMode::Average,
            }),
            CheckedOp::Linear => Box::new(SplatOp {
                mode: SplatMode::Linear,
            }),
            CheckedOp::Softmax => Box::new(SplatOp {
                mode: SplatMode::Softmax,
            }),
            CheckedOp::BrightnessConstancy => Box::new(MetricOp),
        }
    }

    /// Draws random inputs for this operation.
    pub fn random_inputs(
        self,
        rng: &mut ChaCha8Rng,
        height: usize,
        width: usize,
        channels: usize,
    ) -> Vec<ProbeTensor> {
        let grid = |rng: &mut ChaCha8Rng, kind| ProbeTensor {
            kind,
            height,
            width,
            channels,
            data: (0..height * width * channels)
                .map(|_| rng.random_range(0.0..1.0))
                .collect(),
        };
        let flow = ProbeTensor {
            kind: InputKind::Flow,
            height,
            width,
            channels: 2,
            data: smooth_flow(rng, height * width * 2),
        };
        match self {
            CheckedOp::Summation | CheckedOp::Average => vec![grid(rng, InputKind::Source), flow],
            CheckedOp::Linear | CheckedOp::Softmax => {
                let src = grid(rng, InputKind::Source);
                // Linear splatting is only well conditioned for positive Z.
                let range = if self == CheckedOp::Linear {
                    0.5..2.0
                } else {
                    -2.0..2.0
                };
                let z = ProbeTensor {
                    kind: InputKind::Importance,
                    height,
                    width,
                    channels: 1,
                    data: (0..height * width)
                        .map(|_| rng.random_range(range.clone()))
                        .collect(),
                };
                vec![src, flow, z]
            }
            CheckedOp::BrightnessConstancy => {
                let alpha = ProbeTensor::scalar(InputKind::Alpha, rng.random_range(-2.0..-0.5));
                let i0 = grid(rng, InputKind::Frame0);
                let i1 = grid(rng, InputKind::Frame1);
                vec![alpha, i0, i1, flow]
            }
        }
    }
}

impl std::fmt::Display for CheckedOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CheckedOp::Summation => "summation",
            CheckedOp::Average => "average",
            CheckedOp::Linear => "linear",
            CheckedOp::Softmax => "softmax",
            CheckedOp::BrightnessConstancy => "brightness_constancy",
        })
    }
}

impl std::str::FromStr for CheckedOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CheckedOp::ALL
            .into_iter()
            .find(|op| op.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown gradcheck op '{s}'"))
    }
}

/// Flow components from `N(0, 3^2)` whose fractional parts stay at least
/// `KINK_MARGIN` away from the kernel's non-smooth points.
pub fn smooth_flow(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 3.0).expect("valid normal");
    (0..n)
        .map(|_| loop {
            let v: f64 = normal.sample(rng);
            let frac = v - v.floor();
            if (KINK_MARGIN..=1.0 - KINK_MARGIN).contains(&frac) {
                break v;
            }
        })
        .collect()
}

pub fn instance_rng(seed: u64, op: CheckedOp, instance: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(op.tag() << 32).wrapping_add(instance))
}

/// Runs `instances` seeded random checks of `op` on `height x width` inputs,
/// alternating 3 and 1 channels, and folds them into one report.
pub fn check_random_instances(
    op: CheckedOp,
    instances: usize,
    height: usize,
    width: usize,
    config: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let grad_op = op.op();
    let mut total = GradCheckReport::empty(grad_op.name(), config.tolerance);
    for i in 0..instances as u64 {
        let mut rng = instance_rng(config.seed, op, i);
        let channels = if i % 2 == 0 { 3 } else { 1 };
        let inputs = op.random_inputs(&mut rng, height, width, channels);
        let cfg = GradCheckConfig {
            seed: config.seed.wrapping_add(i),
            ..*config
        };
        total.merge(&finite_difference_check(grad_op.as_ref(), &inputs, &cfg)?);
    }
    Ok(total)
}
