//! Brute-force per-output-pixel evaluation of the splat sums.
//!
//! For every target `p` the sum over all sources `q` is evaluated literally,
//! in raster order, with its own tent kernel. Cost is `O((HW)^2)`; intended
//! for grids up to about 32x32.

use crate::error::{internal, Result};
use crate::grid::{FlowField, ImageGrid, ImportanceMap, WarpOutput};
use crate::real::Real;
use crate::splat::{check_inputs, SplatMode};

fn tent(u: f64) -> f64 {
    let a = 1.0 - u.abs();
    if a > 0.0 {
        a
    } else {
        0.0
    }
}

/// Kernel weight of source `q = (qy, qx)` at target `p = (py, px)`.
pub(crate) fn literal_weight<T: Real>(
    flow: &FlowField<T>,
    py: usize,
    px: usize,
    qy: usize,
    qx: usize,
) -> f64 {
    let (dx, dy) = flow.get(qy, qx);
    // u = p - (q + F[q]), evaluated in the grid precision.
    let ux = T::from_f64(px as f64) - (T::from_f64(qx as f64) + dx);
    let uy = T::from_f64(py as f64) - (T::from_f64(qy as f64) + dy);
    tent(ux.as_f64()) * tent(uy.as_f64())
}

fn importance_weights<T: Real>(
    mode: SplatMode,
    n: usize,
    z: Option<&ImportanceMap<T>>,
) -> Vec<f64> {
    match (mode, z) {
        (SplatMode::Linear, Some(z)) => z.as_slice().iter().map(|v| v.as_f64()).collect(),
        (SplatMode::Softmax, Some(z)) => {
            let mut max = f64::NEG_INFINITY;
            for v in z.as_slice() {
                if v.as_f64() > max {
                    max = v.as_f64();
                }
            }
            let shift = max.ceil();
            z.as_slice()
                .iter()
                .map(|v| (v.as_f64() - shift).exp())
                .collect()
        }
        _ => vec![1.0; n],
    }
}

/// Reference implementation of every splat mode by direct summation.
pub fn gather_oracle<T: Real>(
    source: &ImageGrid<T>,
    flow: &FlowField<T>,
    mode: SplatMode,
    z: Option<&ImportanceMap<T>>,
) -> Result<WarpOutput<T>> {
    check_inputs(source, flow, mode, z)?;
    let (h, w, c) = source.shape();
    let eps = T::HOLE_EPSILON.as_f64();
    let m = importance_weights(mode, h * w, z);

    let mut warped = Vec::with_capacity(h * w * c);
    let mut weight = Vec::with_capacity(h * w);
    let mut num = vec![0.0; c];
    for py in 0..h {
        for px in 0..w {
            num.iter_mut().for_each(|v| *v = 0.0);
            let mut coverage = 0.0;
            let mut den = 0.0;
            for qy in 0..h {
                for qx in 0..w {
                    let b = literal_weight(flow, py, px, qy, qx);
                    if b == 0.0 {
                        continue;
                    }
                    let q = qy * w + qx;
                    let bm = if mode == SplatMode::Summation {
                        b
                    } else {
                        b * m[q]
                    };
                    coverage += b;
                    den += bm;
                    for (ch, acc) in num.iter_mut().enumerate() {
                        *acc += bm * source.get(qy, qx, ch).as_f64();
                    }
                }
            }
            let hole = match mode {
                SplatMode::Summation | SplatMode::Average => coverage <= eps,
                SplatMode::Linear => coverage <= eps || den.abs() <= eps,
                SplatMode::Softmax => coverage <= eps || den == 0.0,
            };
            if hole {
                warped.extend(std::iter::repeat_n(T::zero(), c));
                weight.push(T::zero());
            } else if mode == SplatMode::Summation {
                warped.extend(num.iter().map(|&v| T::from_f64(v)));
                weight.push(T::from_f64(coverage));
            } else {
                warped.extend(num.iter().map(|&v| T::from_f64(v / den)));
                weight.push(T::from_f64(den.abs()));
            }
        }
    }
    if warped.iter().any(|v| !v.is_finite()) {
        return Err(internal("gather oracle produced a non-finite value"));
    }
    Ok(WarpOutput {
        warped: ImageGrid::new(h, w, c, warped)?,
        weight: ImageGrid::new(h, w, 1, weight)?,
    })
}
