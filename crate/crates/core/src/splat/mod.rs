//! Forward warping ("splatting") operators.
//!
//! Every mode is built on summation splatting with the bilinear kernel
//! `b(u) = max(0, 1 - |u_x|) * max(0, 1 - |u_y|)`, `u = p - (q + F[q])`:
//!
//! * summation: `sum_q b(u) I[q]`
//! * average:   summation of `I` divided by summation of ones
//! * linear:    summation of `Z I` divided by summation of `Z`
//! * softmax:   summation of `exp(Z) I` divided by summation of `exp(Z)`
//!
//! The normalized modes share one two-pass kernel. The first pass splats the
//! per-source weights `m[q]` (1, `Z` or `exp(Z - shift)`) into the
//! denominator `D`; the second splats `(b m[q] / D[p]) I[q]`, i.e. each
//! contribution's share of the target. A pixel reached by a single source
//! therefore reproduces that source exactly.
//!
//! Contributions landing outside the grid are dropped.

mod backward;
mod scatter;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use backward::{
    splat_average_backward, splat_backward, splat_linear_backward, splat_softmax_backward,
    splat_summation_backward,
};
pub use scatter::Exec;
pub(crate) use scatter::{for_each_row, scatter, targets};

use crate::error::{invalid, Result};
use crate::grid::{FlowField, ImageGrid, ImportanceMap, WarpOutput};
use crate::kernel::bilinear_weight;
use crate::real::Real;

/// The forward-warping operator family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplatMode {
    Summation,
    Average,
    Linear,
    Softmax,
}

impl SplatMode {
    pub const ALL: [SplatMode; 4] = [
        SplatMode::Summation,
        SplatMode::Average,
        SplatMode::Linear,
        SplatMode::Softmax,
    ];

    /// Linear and softmax splatting weigh sources by an importance map.
    pub fn requires_importance(self) -> bool {
        matches!(self, SplatMode::Linear | SplatMode::Softmax)
    }

    pub fn name(self) -> &'static str {
        match self {
            SplatMode::Summation => "summation",
            SplatMode::Average => "average",
            SplatMode::Linear => "linear",
            SplatMode::Softmax => "softmax",
        }
    }
}

impl fmt::Display for SplatMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplatMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "summation" | "sum" => Ok(SplatMode::Summation),
            "average" | "avg" => Ok(SplatMode::Average),
            "linear" => Ok(SplatMode::Linear),
            "softmax" => Ok(SplatMode::Softmax),
            other => Err(format!(
                "unknown splat mode '{other}' (expected summation|average|linear|softmax)"
            )),
        }
    }
}

/// Offset subtracted from `Z` before exponentiation: `ceil(max Z)`.
///
/// Keeps every shifted weight in `(0, 1]` with the largest in `(e^-1, 1]`.
/// Rounding the maximum up to an integer makes the offset locally constant
/// in `Z`, and integer translations of `Z` cancel exactly.
pub fn softmax_shift<T: Real>(z: &ImportanceMap<T>) -> T {
    let max = z.as_slice().iter().copied().fold(T::neg_infinity(), T::max);
    max.ceil()
}

pub(crate) fn check_inputs<T: Real>(
    source: &ImageGrid<T>,
    flow: &FlowField<T>,
    mode: SplatMode,
    z: Option<&ImportanceMap<T>>,
) -> Result<()> {
    flow.check_matches(source.height(), source.width(), "source")?;
    match (mode.requires_importance(), z) {
        (true, None) => Err(invalid(format!(
            "{mode} splatting requires an importance map"
        ))),
        (false, Some(_)) => Err(invalid(format!(
            "{mode} splatting does not take an importance map"
        ))),
        (true, Some(z)) if z.height() != source.height() || z.width() != source.width() => {
            Err(invalid(format!(
                "importance map is {}x{} but source is {}x{}",
                z.height(),
                z.width(),
                source.height(),
                source.width()
            )))
        }
        _ => Ok(()),
    }
}

/// Per-source normalization weights `m[q]` of a normalized mode.
pub(crate) fn source_weights<T: Real>(
    mode: SplatMode,
    n: usize,
    z: Option<&ImportanceMap<T>>,
) -> Vec<T> {
    match (mode, z) {
        (SplatMode::Linear, Some(z)) => z.as_slice().to_vec(),
        (SplatMode::Softmax, Some(z)) => {
            let shift = softmax_shift(z);
            z.as_slice().iter().map(|&v| (v - shift).exp()).collect()
        }
        _ => vec![T::one(); n],
    }
}

/// Result of the normalized forward pass, kept for the backward pass.
pub(crate) struct Normalized<T> {
    pub out: Vec<T>,
    pub den: Vec<T>,
    pub covered: Vec<bool>,
    pub m: Vec<T>,
}

pub(crate) fn summation_raw<T: Real>(
    exec: &Exec,
    source: &ImageGrid<T>,
    flow: &FlowField<T>,
) -> (Vec<T>, Vec<T>) {
    let c = source.channels();
    let k = c + 1;
    let src = source.as_slice();
    let acc = scatter(exec, flow, k, |q, t, slot| {
        let b = bilinear_weight(t.ux, t.uy);
        for (s, &v) in slot[..c].iter_mut().zip(&src[q * c..q * c + c]) {
            *s += b * v;
        }
        slot[c] += b;
    });
    let n = flow.height() * flow.width();
    let mut out = Vec::with_capacity(n * c);
    let mut weight = Vec::with_capacity(n);
    for px in acc.chunks_exact(k) {
        if px[c] > T::HOLE_EPSILON {
            out.extend_from_slice(&px[..c]);
            weight.push(px[c]);
        } else {
            out.extend(std::iter::repeat_n(T::zero(), c));
            weight.push(T::zero());
        }
    }
    (out, weight)
}

pub(crate) fn normalized_raw<T: Real>(
    exec: &Exec,
    source: &ImageGrid<T>,
    flow: &FlowField<T>,
    mode: SplatMode,
    z: Option<&ImportanceMap<T>>,
) -> Normalized<T> {
    let c = source.channels();
    let n = flow.height() * flow.width();
    let m = source_weights(mode, n, z);

    let first = scatter(exec, flow, 2, |q, t, slot| {
        let b = bilinear_weight(t.ux, t.uy);
        slot[0] += b;
        slot[1] += b * m[q];
    });
    let den_floor = if mode == SplatMode::Linear {
        T::HOLE_EPSILON
    } else {
        T::zero()
    };
    let mut covered = Vec::with_capacity(n);
    let mut den = Vec::with_capacity(n);
    for px in first.chunks_exact(2) {
        let ok = px[0] > T::HOLE_EPSILON && px[1].abs() > den_floor;
        covered.push(ok);
        den.push(if ok { px[1] } else { T::zero() });
    }

    let src = source.as_slice();
    let out = scatter(exec, flow, c, |q, t, slot| {
        if !covered[t.pixel] {
            return;
        }
        let share = bilinear_weight(t.ux, t.uy) * m[q] / den[t.pixel];
        for (s, &v) in slot.iter_mut().zip(&src[q * c..q * c + c]) {
            *s += share * v;
        }
    });
    Normalized {
        out,
        den,
        covered,
        m,
    }
}

impl Exec {
    pub fn splat<T: Real>(
        &self,
        source: &ImageGrid<T>,
        flow: &FlowField<T>,
        mode: SplatMode,
        z: Option<&ImportanceMap<T>>,
    ) -> Result<WarpOutput<T>> {
        check_inputs(source, flow, mode, z)?;
        let (h, w, c) = source.shape();
        let (out, weight) = match mode {
            SplatMode::Summation => summation_raw(self, source, flow),
            _ => {
                let fwd = normalized_raw(self, source, flow, mode, z);
                (fwd.out, fwd.den.into_iter().map(|d| d.abs()).collect())
            }
        };
        Ok(WarpOutput {
            warped: ImageGrid::from_computed(h, w, c, out)?,
            weight: ImageGrid::from_computed(h, w, 1, weight)?,
        })
    }
}

/// Splats `source` along `flow` with the given mode.
///
/// `z` must be present exactly for linear and softmax modes.
pub fn splat<T: Real>(
    source: &ImageGrid<T>,
    flow: &FlowField<T>,
    mode: SplatMode,
    z: Option<&ImportanceMap<T>>,
) -> Result<WarpOutput<T>> {
    Exec::default().splat(source, flow, mode, z)
}

/// Sum of all bilinear contributions; `weight` is the splat of ones.
pub fn splat_summation<T: Real>(
    source: &ImageGrid<T>,
    flow: &FlowField<T>,
) -> Result<WarpOutput<T>> {
    splat(source, flow, SplatMode::Summation, None)
}

/// Summation splat normalized by the splat of ones.
pub fn splat_average<T: Real>(source: &ImageGrid<T>, flow: &FlowField<T>) -> Result<WarpOutput<T>> {
    splat(source, flow, SplatMode::Average, None)
}

/// Splat of `Z * source` normalized by the splat of `Z`.
///
/// Not invariant to translations of `Z`; meaningful for positive `Z`.
pub fn splat_linear<T: Real>(
    source: &ImageGrid<T>,
    flow: &FlowField<T>,
    z: &ImportanceMap<T>,
) -> Result<WarpOutput<T>> {
    splat(source, flow, SplatMode::Linear, Some(z))
}

/// Splat of `exp(Z) * source` normalized by the splat of `exp(Z)`.
pub fn splat_softmax<T: Real>(
    source: &ImageGrid<T>,
    flow: &FlowField<T>,
    z: &ImportanceMap<T>,
) -> Result<WarpOutput<T>> {
    splat(source, flow, SplatMode::Softmax, Some(z))
}
