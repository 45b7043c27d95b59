//! Analytic gradients of the splatting operators.
//!
//! For a loss `L` with upstream gradient `g = dL/d out`, summation splatting
//! gives
//!
//! ```text
//! dL/dI[q,c] = sum_p g[p,c] b(u)
//! dL/dF^x[q] = sum_p (db/dF^x)(u) sum_c g[p,c] I[q,c]        (y analogous)
//! ```
//!
//! The normalized modes compute `out = N / D` with `N = splat(m I)` and
//! `D = splat(m)`, so the quotient rule turns `g` into upstream gradients
//! `g / D` for `N` and `-sum_c g out / D` for `D`, which are then pushed
//! through the same two summation adjoints. The mode-specific weights `m`
//! (1, `Z`, `exp(Z - shift)`) finish the chain into `dL/dZ`.
//!
//! Each source pixel only reads the targets of its own footprint, so the
//! backward passes are gathers: parallel over source rows, race-free and
//! deterministic.

use crate::error::{invalid, Result};
use crate::grid::{FlowField, GradientBundle, ImageGrid, ImportanceMap};
use crate::kernel::bilinear_kernel;
use crate::real::Real;

use super::{check_inputs, for_each_row, normalized_raw, summation_raw, targets, Exec, SplatMode};

impl Exec {
    pub fn splat_backward<T: Real>(
        &self,
        source: &ImageGrid<T>,
        flow: &FlowField<T>,
        mode: SplatMode,
        z: Option<&ImportanceMap<T>>,
        upstream: &ImageGrid<T>,
    ) -> Result<GradientBundle<T>> {
        check_inputs(source, flow, mode, z)?;
        if upstream.shape() != source.shape() {
            return Err(invalid(format!(
                "upstream gradient is {:?} but the forward output is {:?}",
                upstream.shape(),
                source.shape()
            )));
        }
        match mode {
            SplatMode::Summation => summation_backward(self, source, flow, upstream),
            _ => normalized_backward(self, source, flow, mode, z, upstream),
        }
    }
}

fn summation_backward<T: Real>(
    exec: &Exec,
    source: &ImageGrid<T>,
    flow: &FlowField<T>,
    upstream: &ImageGrid<T>,
) -> Result<GradientBundle<T>> {
    let (h, w, c) = source.shape();
    // Holes are forced to zero, so their upstream does not propagate.
    let (_, weight) = summation_raw(exec, source, flow);
    let g = upstream.as_slice();
    let src = source.as_slice();

    // Per source pixel: c source gradients followed by (dx, dy).
    let stride = c + 2;
    let mut packed = vec![T::zero(); h * w * stride];
    for_each_row(exec, &mut packed, w * stride, |y, row| {
        for x in 0..w {
            let q = y * w + x;
            let cell = &mut row[x * stride..(x + 1) * stride];
            let value = &src[q * c..q * c + c];
            for t in targets(flow, y, x) {
                if weight[t.pixel] == T::zero() {
                    continue;
                }
                let k = bilinear_kernel(t.ux, t.uy);
                let gp = &g[t.pixel * c..t.pixel * c + c];
                let mut dot = T::zero();
                for ch in 0..c {
                    cell[ch] += k.weight * gp[ch];
                    dot += gp[ch] * value[ch];
                }
                cell[c] += k.d_weight_dx * dot;
                cell[c + 1] += k.d_weight_dy * dot;
            }
        }
    });
    unpack(h, w, c, &packed, stride, c, None)
}

fn normalized_backward<T: Real>(
    exec: &Exec,
    source: &ImageGrid<T>,
    flow: &FlowField<T>,
    mode: SplatMode,
    z: Option<&ImportanceMap<T>>,
    upstream: &ImageGrid<T>,
) -> Result<GradientBundle<T>> {
    let (h, w, c) = source.shape();
    let fwd = normalized_raw(exec, source, flow, mode, z);
    let g = upstream.as_slice();

    // Upstream gradients of the numerator (c channels) and denominator (1).
    let k = c + 1;
    let mut g_nd = vec![T::zero(); h * w * k];
    for (p, cell) in g_nd.chunks_exact_mut(k).enumerate() {
        if !fwd.covered[p] {
            continue;
        }
        let d = fwd.den[p];
        let mut dot = T::zero();
        for ch in 0..c {
            cell[ch] = g[p * c + ch] / d;
            dot += g[p * c + ch] * fwd.out[p * c + ch];
        }
        cell[c] = -dot / d;
    }

    let src = source.as_slice();
    let m = &fwd.m;
    // Per source pixel: c source gradients, d m, then (dx, dy).
    let stride = c + 3;
    let mut packed = vec![T::zero(); h * w * stride];
    for_each_row(exec, &mut packed, w * stride, |y, row| {
        let mut a_num = vec![T::zero(); c];
        for x in 0..w {
            let q = y * w + x;
            let cell = &mut row[x * stride..(x + 1) * stride];
            let value = &src[q * c..q * c + c];
            a_num.fill(T::zero());
            let mut a_den = T::zero();
            let (mut fx, mut fy) = (T::zero(), T::zero());
            for t in targets(flow, y, x) {
                if !fwd.covered[t.pixel] {
                    continue;
                }
                let kv = bilinear_kernel(t.ux, t.uy);
                let gp = &g_nd[t.pixel * k..(t.pixel + 1) * k];
                let mut dot = gp[c];
                for ch in 0..c {
                    a_num[ch] += kv.weight * gp[ch];
                    dot += gp[ch] * value[ch];
                }
                a_den += kv.weight * gp[c];
                fx += kv.d_weight_dx * dot;
                fy += kv.d_weight_dy * dot;
            }
            let mut d_m = a_den;
            for ch in 0..c {
                cell[ch] = m[q] * a_num[ch];
                d_m += value[ch] * a_num[ch];
            }
            cell[c] = d_m;
            cell[c + 1] = m[q] * fx;
            cell[c + 2] = m[q] * fy;
        }
    });

    let d_importance: Option<Vec<T>> = match mode {
        SplatMode::Linear => Some(packed.chunks_exact(stride).map(|cell| cell[c]).collect()),
        SplatMode::Softmax => Some(
            packed
                .chunks_exact(stride)
                .zip(m)
                .map(|(cell, &mq)| cell[c] * mq)
                .collect(),
        ),
        _ => None,
    };
    unpack(h, w, c, &packed, stride, c + 1, d_importance)
}

/// Splits per-pixel cells into source and flow gradients; the source part
/// is at the front of each cell and the flow pair at `flow_at`.
fn unpack<T: Real>(
    h: usize,
    w: usize,
    c: usize,
    packed: &[T],
    stride: usize,
    flow_at: usize,
    d_importance: Option<Vec<T>>,
) -> Result<GradientBundle<T>> {
    let mut d_source = Vec::with_capacity(h * w * c);
    let mut d_flow = Vec::with_capacity(h * w * 2);
    for cell in packed.chunks_exact(stride) {
        d_source.extend_from_slice(&cell[..c]);
        d_flow.extend_from_slice(&cell[flow_at..flow_at + 2]);
    }
    Ok(GradientBundle {
        d_source: ImageGrid::from_computed(h, w, c, d_source)?,
        d_flow: FlowField::from_computed(h, w, d_flow)?,
        d_importance: d_importance
            .map(|d| ImportanceMap::from_computed(h, w, d))
            .transpose()?,
    })
}

/// Gradients of any splat mode; `upstream` is `dL/d warped`.
pub fn splat_backward<T: Real>(
    source: &ImageGrid<T>,
    flow: &FlowField<T>,
    mode: SplatMode,
    z: Option<&ImportanceMap<T>>,
    upstream: &ImageGrid<T>,
) -> Result<GradientBundle<T>> {
    Exec::default().splat_backward(source, flow, mode, z, upstream)
}

pub fn splat_summation_backward<T: Real>(
    source: &ImageGrid<T>,
    flow: &FlowField<T>,
    upstream: &ImageGrid<T>,
) -> Result<GradientBundle<T>> {
    splat_backward(source, flow, SplatMode::Summation, None, upstream)
}

pub fn splat_average_backward<T: Real>(
    source: &ImageGrid<T>,
    flow: &FlowField<T>,
    upstream: &ImageGrid<T>,
) -> Result<GradientBundle<T>> {
    splat_backward(source, flow, SplatMode::Average, None, upstream)
}

pub fn splat_linear_backward<T: Real>(
    source: &ImageGrid<T>,
    flow: &FlowField<T>,
    z: &ImportanceMap<T>,
    upstream: &ImageGrid<T>,
) -> Result<GradientBundle<T>> {
    splat_backward(source, flow, SplatMode::Linear, Some(z), upstream)
}

pub fn splat_softmax_backward<T: Real>(
    source: &ImageGrid<T>,
    flow: &FlowField<T>,
    z: &ImportanceMap<T>,
    upstream: &ImageGrid<T>,
) -> Result<GradientBundle<T>> {
    splat_backward(source, flow, SplatMode::Softmax, Some(z), upstream)
}
