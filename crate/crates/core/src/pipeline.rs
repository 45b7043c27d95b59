//! Two-frame interpolation: splat both frames to time `t` and blend.
//!
//! `I0` is splatted along `t * flow01` and `I1` along `(1 - t) * flow10`.
//! The two warped frames are combined with a closed-form blend that weighs
//! each side by its splat weight and a `(1 - t)` / `t` time prior:
//!
//! ```text
//! frame = (w0 (1-t) warp0 + w1 t warp1) / (w0 (1-t) + w1 t)
//! ```
//!
//! A pixel covered by one side only takes that side's value. Pixels covered
//! by neither are holes: value 0 and `hole_mask = 1`. Holes are reported,
//! never filled.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::grid::{scale_flow, FlowField, ImageGrid, ImportanceMap};
use crate::metric::MetricParams;
use crate::real::Real;
use crate::splat::{softmax_shift, Exec, SplatMode};

/// Reported PSNR for an exact reconstruction.
pub const PSNR_CAP: f64 = 99.0;

/// Where the importance maps of the two sides come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Importance<T = f64> {
    /// Brightness constancy, `Z0` from `(i0, i1, flow01)` and `Z1` from
    /// `(i1, i0, flow10)`, plus a constant `offset` added to both.
    Metric { params: MetricParams, offset: f64 },
    /// Externally computed maps, e.g. from a learned model.
    Supplied {
        z0: ImportanceMap<T>,
        z1: ImportanceMap<T>,
    },
}

impl<T> Default for Importance<T> {
    fn default() -> Self {
        Importance::Metric {
            params: MetricParams::default(),
            offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationRequest<T = f64> {
    pub i0: ImageGrid<T>,
    pub i1: ImageGrid<T>,
    pub flow01: FlowField<T>,
    pub flow10: FlowField<T>,
    pub times: Vec<f64>,
    pub mode: SplatMode,
    pub importance: Importance<T>,
}

impl<T: Real> InterpolationRequest<T> {
    pub fn new(
        i0: ImageGrid<T>,
        i1: ImageGrid<T>,
        flow01: FlowField<T>,
        flow10: FlowField<T>,
        times: Vec<f64>,
        mode: SplatMode,
        params: MetricParams,
    ) -> Self {
        Self {
            i0,
            i1,
            flow01,
            flow10,
            times,
            mode,
            importance: Importance::Metric {
                params,
                offset: 0.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.i0.shape() != self.i1.shape() {
            return Err(invalid(format!(
                "frames differ in shape: {:?} vs {:?}",
                self.i0.shape(),
                self.i1.shape()
            )));
        }
        let (h, w) = (self.i0.height(), self.i0.width());
        self.flow01.check_matches(h, w, "frame")?;
        self.flow10.check_matches(h, w, "frame")?;
        if self.times.is_empty() {
            return Err(invalid("no interpolation times requested"));
        }
        if let Some(t) = self.times.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(invalid(format!("time {t} is not strictly inside (0, 1)")));
        }
        match &self.importance {
            Importance::Metric { offset, .. } if !offset.is_finite() => {
                Err(invalid(format!("importance offset {offset} is not finite")))
            }
            Importance::Supplied { z0, z1 } => {
                for z in [z0, z1] {
                    if z.height() != h || z.width() != w {
                        return Err(invalid(format!(
                            "importance map is {}x{} but frames are {h}x{w}",
                            z.height(),
                            z.width()
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutput<T = f64> {
    pub t: f64,
    pub frame: ImageGrid<T>,
    /// 1 where neither side covers the pixel, else 0.
    pub hole_mask: ImageGrid<T>,
    /// Shares of the warped `I0` and `I1` in each output pixel.
    pub per_side_weights: [ImageGrid<T>; 2],
}

impl<T: Real> FusionOutput<T> {
    pub fn hole_fraction(&self) -> f64 {
        let holes = self
            .hole_mask
            .as_slice()
            .iter()
            .filter(|&&v| v > T::zero())
            .count();
        holes as f64 / self.hole_mask.len() as f64
    }
}

/// One row of a temporal sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub t: f64,
    /// Present only when a reference frame was supplied.
    pub psnr: Option<f64>,
    pub hole_fraction: f64,
    /// Mean share of each side over non-hole pixels.
    pub mean_weight0: f64,
    pub mean_weight1: f64,
}

impl SweepRecord {
    fn from_output<T: Real>(out: &FusionOutput<T>, psnr: Option<f64>) -> Self {
        let (mut s0, mut s1, mut n) = (0.0, 0.0, 0usize);
        for ((h, a), b) in out
            .hole_mask
            .as_slice()
            .iter()
            .zip(out.per_side_weights[0].as_slice())
            .zip(out.per_side_weights[1].as_slice())
        {
            if *h == T::zero() {
                s0 += a.as_f64();
                s1 += b.as_f64();
                n += 1;
            }
        }
        let n = n.max(1) as f64;
        Self {
            t: out.t,
            psnr,
            hole_fraction: out.hole_fraction(),
            mean_weight0: s0 / n,
            mean_weight1: s1 / n,
        }
    }
}

/// `10 log10(1 / MSE)` for images in `[0, 1]`, capped at [`PSNR_CAP`].
pub fn psnr<T: Real>(a: &ImageGrid<T>, b: &ImageGrid<T>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(invalid(format!(
            "cannot compare {:?} with {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let se: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x.as_f64() - y.as_f64()).powi(2))
        .sum();
    let mse = se / a.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

/// Blends two warped frames with their weight maps at time `t`.
pub fn fuse<T: Real>(
    t: f64,
    warp0: &ImageGrid<T>,
    weight0: &ImageGrid<T>,
    warp1: &ImageGrid<T>,
    weight1: &ImageGrid<T>,
) -> Result<FusionOutput<T>> {
    if warp0.shape() != warp1.shape() {
        return Err(invalid(format!(
            "warped frames differ in shape: {:?} vs {:?}",
            warp0.shape(),
            warp1.shape()
        )));
    }
    let (h, w, c) = warp0.shape();
    if weight0.shape() != (h, w, 1) || weight1.shape() != (h, w, 1) {
        return Err(invalid(
            "weight maps must be single-channel and match the frames",
        ));
    }
    let tt = T::from_f64(t);
    let one_minus = T::from_f64(1.0 - t);
    let (a, b) = (warp0.as_slice(), warp1.as_slice());
    let mut frame = Vec::with_capacity(h * w * c);
    let mut holes = Vec::with_capacity(h * w);
    let mut s0 = Vec::with_capacity(h * w);
    let mut s1 = Vec::with_capacity(h * w);
    for (p, (&w0, &w1)) in weight0
        .as_slice()
        .iter()
        .zip(weight1.as_slice())
        .enumerate()
    {
        let (pa, pb) = (&a[p * c..(p + 1) * c], &b[p * c..(p + 1) * c]);
        // A side counts as covered iff its splat weight is positive; the
        // splat operators already zero the weight of every hole.
        let share1 = match (w0 > T::zero(), w1 > T::zero()) {
            (true, true) => {
                let q0 = w0 * one_minus;
                let q1 = w1 * tt;
                Some(q1 / (q0 + q1))
            }
            (true, false) => Some(T::zero()),
            (false, true) => Some(T::one()),
            (false, false) => None,
        };
        match share1 {
            Some(s) => {
                frame.extend(pa.iter().zip(pb).map(|(&x, &y)| x + s * (y - x)));
                holes.push(T::zero());
                s0.push(T::one() - s);
                s1.push(s);
            }
            None => {
                frame.extend(std::iter::repeat_n(T::zero(), c));
                holes.push(T::one());
                s0.push(T::zero());
                s1.push(T::zero());
            }
        }
    }
    Ok(FusionOutput {
        t,
        frame: ImageGrid::from_computed(h, w, c, frame)?,
        hole_mask: ImageGrid::new(h, w, 1, holes)?,
        per_side_weights: [
            ImageGrid::from_computed(h, w, 1, s0)?,
            ImageGrid::from_computed(h, w, 1, s1)?,
        ],
    })
}

struct Prepared<T> {
    z0: Option<ImportanceMap<T>>,
    z1: Option<ImportanceMap<T>>,
}

impl Exec {
    fn prepare<T: Real>(&self, req: &InterpolationRequest<T>) -> Result<Prepared<T>> {
        req.validate()?;
        if !req.mode.requires_importance() {
            return Ok(Prepared { z0: None, z1: None });
        }
        let (z0, z1) = match &req.importance {
            Importance::Metric { params, offset } => {
                let z0 = self.brightness_constancy(&req.i0, &req.i1, &req.flow01, *params)?;
                let z1 = self.brightness_constancy(&req.i1, &req.i0, &req.flow10, *params)?;
                if *offset == 0.0 {
                    (z0, z1)
                } else {
                    let o = T::from_f64(*offset);
                    (z0.shifted(o)?, z1.shifted(o)?)
                }
            }
            Importance::Supplied { z0, z1 } => (z0.clone(), z1.clone()),
        };
        if req.mode == SplatMode::Softmax {
            // Softmax weight maps are relative to the shift of their own
            // splat. A shared integer shift puts both sides on one scale, so
            // the blend compares importance across sides too.
            let shared = softmax_shift(&z0).max(softmax_shift(&z1));
            if shared != T::zero() {
                return Ok(Prepared {
                    z0: Some(z0.shifted(-shared)?),
                    z1: Some(z1.shifted(-shared)?),
                });
            }
        }
        Ok(Prepared {
            z0: Some(z0),
            z1: Some(z1),
        })
    }

    fn interpolate_at<T: Real>(
        &self,
        req: &InterpolationRequest<T>,
        prep: &Prepared<T>,
        t: f64,
    ) -> Result<FusionOutput<T>> {
        let f0 = scale_flow(&req.flow01, T::from_f64(t))?;
        let f1 = scale_flow(&req.flow10, T::from_f64(1.0 - t))?;
        let w0 = self.splat(&req.i0, &f0, req.mode, prep.z0.as_ref())?;
        let w1 = self.splat(&req.i1, &f1, req.mode, prep.z1.as_ref())?;
        fuse(t, &w0.warped, &w0.weight, &w1.warped, &w1.weight)
    }

    /// One fused frame per requested time, in request order.
    pub fn interpolate<T: Real>(
        &self,
        req: &InterpolationRequest<T>,
    ) -> Result<Vec<FusionOutput<T>>> {
        let prep = self.prepare(req)?;
        req.times
            .iter()
            .map(|&t| self.interpolate_at(req, &prep, t))
            .collect()
    }

    /// Interpolates every requested time concurrently and summarizes each
    /// frame, scoring it against `reference[i]` when given.
    pub fn temporal_sweep<T: Real>(
        &self,
        req: &InterpolationRequest<T>,
        reference: Option<&[ImageGrid<T>]>,
    ) -> Result<Vec<SweepRecord>> {
        if let Some(r) = reference {
            if r.len() != req.times.len() {
                return Err(invalid(format!(
                    "{} reference frames for {} times",
                    r.len(),
                    req.times.len()
                )));
            }
        }
        let prep = self.prepare(req)?;
        self.install(|| {
            req.times
                .par_iter()
                .enumerate()
                .map(|(i, &t)| {
                    let out = self.interpolate_at(req, &prep, t)?;
                    let score = reference.map(|r| psnr(&out.frame, &r[i])).transpose()?;
                    Ok(SweepRecord::from_output(&out, score))
                })
                .collect()
        })
    }
}

pub fn interpolate<T: Real>(req: &InterpolationRequest<T>) -> Result<Vec<FusionOutput<T>>> {
    Exec::default().interpolate(req)
}

pub fn temporal_sweep<T: Real>(
    req: &InterpolationRequest<T>,
    reference: Option<&[ImageGrid<T>]>,
) -> Result<Vec<SweepRecord>> {
    Exec::default().temporal_sweep(req, reference)
}

/// `k / steps` for `k = 1 .. steps - 1`.
pub fn sweep_times(steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(invalid(format!(
            "a sweep needs at least 2 steps, got {steps}"
        )));
    }
    Ok((1..steps).map(|k| k as f64 / steps as f64).collect())
}
