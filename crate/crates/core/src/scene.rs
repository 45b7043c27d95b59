//! Synthetic frame pairs with exact flows and known intermediate frames.
//!
//! All colors are procedural functions quantized to multiples of 1/255, so
//! scenes survive an 8-bit round trip unchanged. Every scene moves along
//! `x` only.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{scale_flow, FlowField, ImageGrid};
use crate::real::Real;
use crate::splat::splat_summation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneKind {
    /// A textured square translating over a static textured background.
    TwoLayer,
    /// A full-frame pattern translating rigidly; content enters at one edge.
    RigidTranslate,
    /// A textured disc rotating about the frame center over a static background.
    Rotating,
}

impl SceneKind {
    pub const ALL: [SceneKind; 3] = [
        SceneKind::TwoLayer,
        SceneKind::RigidTranslate,
        SceneKind::Rotating,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SceneKind::TwoLayer => "two-layer",
            SceneKind::RigidTranslate => "rigid-translate",
            SceneKind::Rotating => "rotating",
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SceneKind {
    type Err = crate::error::WarpError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase().replace('_', "-");
        SceneKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                invalid(format!(
                    "unknown scene kind '{s}' (expected two-layer, rigid-translate or rotating)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene<T = f64> {
    pub kind: SceneKind,
    pub i0: ImageGrid<T>,
    pub i1: ImageGrid<T>,
    pub flow01: FlowField<T>,
    pub flow10: FlowField<T>,
    /// Ground-truth intermediate frames, sorted by `t`.
    pub truth: Vec<(f64, ImageGrid<T>)>,
}

impl<T: Real> Scene<T> {
    pub fn truth_at(&self, t: f64) -> Option<&ImageGrid<T>> {
        self.truth.iter().find(|(tt, _)| *tt == t).map(|(_, g)| g)
    }

    pub fn truth_times(&self) -> Vec<f64> {
        self.truth.iter().map(|(t, _)| *t).collect()
    }

    pub fn cast<U: Real>(&self) -> Scene<U> {
        Scene {
            kind: self.kind,
            i0: self.i0.cast(),
            i1: self.i1.cast(),
            flow01: self.flow01.cast(),
            flow10: self.flow10.cast(),
            truth: self.truth.iter().map(|(t, g)| (*t, g.cast())).collect(),
        }
    }

    /// Pixels that receive footprints from more than one source in either
    /// warp direction at time `t`.
    pub fn collision_mask(&self, t: f64) -> Result<ImageGrid<T>> {
        collision_mask(&self.flow01, &self.flow10, t)
    }
}

/// 1 where the summed footprint of `t * flow01` or of `(1 - t) * flow10`
/// exceeds one source, else 0.
pub fn collision_mask<T: Real>(
    flow01: &FlowField<T>,
    flow10: &FlowField<T>,
    t: f64,
) -> Result<ImageGrid<T>> {
    let (h, w) = (flow01.height(), flow01.width());
    let ones = ImageGrid::filled(h, w, 1, T::one())?;
    let c0 = splat_summation(&ones, &scale_flow(flow01, T::from_f64(t))?)?.weight;
    let c1 = splat_summation(&ones, &scale_flow(flow10, T::from_f64(1.0 - t))?)?.weight;
    let limit = T::one() + T::from_f64(1e-9);
    let mask = c0.as_slice().iter().zip(c1.as_slice()).map(|(&a, &b)| {
        if a > limit || b > limit {
            T::one()
        } else {
            T::zero()
        }
    });
    ImageGrid::new(h, w, 1, mask.collect())
}

fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// Background texture, values in `[0.05, 0.25]`.
fn background(x: f64, y: f64, c: usize) -> f64 {
    quantize(0.15 + 0.1 * (0.7 * x + 0.3 * y + c as f64).sin())
}

/// Foreground texture in layer coordinates, values in `[0.8, 0.95]`.
fn foreground(u: f64, v: f64, c: usize) -> f64 {
    quantize(0.875 + 0.075 * (0.9 * u - 0.4 * v + 2.0 * c as f64).sin())
}

/// Full-frame texture for rigid translation, values in `[0.05, 0.95]`.
fn pattern(x: f64, y: f64, c: usize) -> f64 {
    let c = c as f64;
    quantize(
        0.5 + 0.3 * (0.31 * x + 0.17 * y + c).sin() + 0.15 * (0.23 * y - 0.11 * x + 2.0 * c).cos(),
    )
}

/// Disc texture in disc coordinates, values in `[0.3, 0.9]`.
fn disc(u: f64, v: f64, c: usize) -> f64 {
    let c = c as f64;
    quantize(0.6 + 0.3 * (0.5 * u + c).sin() * (0.4 * v - c).cos())
}

const CHANNELS: usize = 3;

/// Builds a `size x size` RGB scene whose moving content travels
/// `displacement` pixels along `x` from `i0` to `i1`.
///
/// For `rotating`, `displacement` is the arc length travelled by the disc
/// rim. Ground truth is emitted at every `t` where the displacement is a
/// whole number of pixels (`t = k / |displacement|`); the rotating scene,
/// whose truth is analytic, emits `t = 1/4, 1/2, 3/4`. A static scene emits
/// `t = 1/2`.
pub fn make_scene(kind: SceneKind, size: usize, displacement: f64) -> Result<Scene> {
    if size < 8 {
        return Err(invalid(format!(
            "scene size {size} is below the minimum of 8"
        )));
    }
    if !displacement.is_finite() {
        return Err(invalid(format!(
            "displacement {displacement} is not finite"
        )));
    }
    match kind {
        SceneKind::TwoLayer => two_layer(size, displacement),
        SceneKind::RigidTranslate => rigid_translate(size, displacement),
        SceneKind::Rotating => rotating(size, displacement),
    }
}

fn integer_times(d: f64) -> Vec<f64> {
    let n = d.abs().ceil() as usize;
    if n == 0 {
        return vec![0.5];
    }
    (1..n).map(|k| k as f64 / d.abs()).collect()
}

fn two_layer(size: usize, d: f64) -> Result<Scene> {
    if d.fract() != 0.0 {
        return Err(invalid(format!(
            "two-layer displacement must be a whole number of pixels, got {d}"
        )));
    }
    let side = size / 4;
    let travel = d.abs() as usize;
    if side + travel + 2 > size {
        return Err(invalid(format!(
            "foreground of side {side} moving {d} px leaves the {size}x{size} frame"
        )));
    }
    let left = (size - side - travel) / 2 + if d < 0.0 { travel } else { 0 };
    let top = (size - side) / 2;
    let frame_at = |shift: f64| {
        let x0 = left as f64 + shift;
        ImageGrid::from_fn(size, size, CHANNELS, |y, x, c| {
            let (u, v) = (x as f64 - x0, y as f64 - top as f64);
            if (0.0..side as f64).contains(&u) && (0.0..side as f64).contains(&v) {
                foreground(u, v, c)
            } else {
                background(x as f64, y as f64, c)
            }
        })
    };
    let inside = |x: usize, y: usize, x0: f64| {
        let u = x as f64 - x0;
        (0.0..side as f64).contains(&u) && (top..top + side).contains(&y)
    };
    let flow01 = FlowField::from_fn(size, size, |y, x| {
        if inside(x, y, left as f64) {
            (d, 0.0)
        } else {
            (0.0, 0.0)
        }
    })?;
    let flow10 = FlowField::from_fn(size, size, |y, x| {
        if inside(x, y, left as f64 + d) {
            (-d, 0.0)
        } else {
            (0.0, 0.0)
        }
    })?;
    let truth = integer_times(d)
        .into_iter()
        .map(|t| Ok((t, frame_at((t * d).round())?)))
        .collect::<Result<_>>()?;
    Ok(Scene {
        kind: SceneKind::TwoLayer,
        i0: frame_at(0.0)?,
        i1: frame_at(d)?,
        flow01,
        flow10,
        truth,
    })
}

fn rigid_translate(size: usize, d: f64) -> Result<Scene> {
    if d.abs() >= size as f64 {
        return Err(invalid(format!(
            "translation of {d} px moves the whole {size}x{size} frame out of view"
        )));
    }
    let frame_at = |shift: f64| {
        ImageGrid::from_fn(size, size, CHANNELS, |y, x, c| {
            pattern(x as f64 - shift, y as f64, c)
        })
    };
    let truth = integer_times(d)
        .into_iter()
        .map(|t| Ok((t, frame_at((t * d).round())?)))
        .collect::<Result<_>>()?;
    Ok(Scene {
        kind: SceneKind::RigidTranslate,
        i0: frame_at(0.0)?,
        i1: frame_at(d)?,
        flow01: FlowField::uniform(size, size, d, 0.0)?,
        flow10: FlowField::uniform(size, size, -d, 0.0)?,
        truth,
    })
}

fn rotating(size: usize, d: f64) -> Result<Scene> {
    let c = (size as f64 - 1.0) / 2.0;
    let radius = size as f64 / 4.0;
    let theta = d / radius;
    if theta.abs() > std::f64::consts::FRAC_PI_2 {
        return Err(invalid(format!(
            "rim displacement {d} exceeds a quarter turn of the radius-{radius} disc"
        )));
    }
    let in_disc = |x: usize, y: usize| (x as f64 - c).hypot(y as f64 - c) <= radius;
    let frame_at = |angle: f64| {
        let (s, k) = angle.sin_cos();
        ImageGrid::from_fn(size, size, CHANNELS, |y, x, ch| {
            if in_disc(x, y) {
                // Undo the rotation to find the disc coordinate under this pixel.
                let (px, py) = (x as f64 - c, y as f64 - c);
                disc(k * px + s * py, -s * px + k * py, ch)
            } else {
                background(x as f64, y as f64, ch)
            }
        })
    };
    let flow_for = |angle: f64| {
        let (s, k) = angle.sin_cos();
        FlowField::from_fn(size, size, |y, x| {
            if in_disc(x, y) {
                let (px, py) = (x as f64 - c, y as f64 - c);
                (k * px - s * py - px, s * px + k * py - py)
            } else {
                (0.0, 0.0)
            }
        })
    };
    let times = if d == 0.0 {
        vec![0.5]
    } else {
        vec![0.25, 0.5, 0.75]
    };
    let truth = times
        .into_iter()
        .map(|t| Ok((t, frame_at(t * theta)?)))
        .collect::<Result<_>>()?;
    Ok(Scene {
        kind: SceneKind::Rotating,
        i0: frame_at(0.0)?,
        i1: frame_at(theta)?,
        flow01: flow_for(theta)?,
        flow10: flow_for(-theta)?,
        truth,
    })
}
