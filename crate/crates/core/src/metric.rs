//! Brightness-constancy importance metric.
//!
//! `Z[q] = alpha * sum_c |i0[q,c] - backward_warp(i1, flow01)[q,c]|`
//!
//! The L1 norm is summed over channels, not averaged. With the default
//! `alpha = -1`, pixels whose color is not explained by the flow (typically
//! occluded ones) get a lower importance than well-matched pixels.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{FlowField, ImageGrid, ImportanceMap};
use crate::real::Real;
use crate::splat::Exec;

pub const DEFAULT_ALPHA: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub alpha: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl MetricParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(invalid(format!("alpha {alpha} is not finite")));
        }
        Ok(Self { alpha })
    }
}

/// Gradients of a loss on `Z` with respect to every metric input.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGradients<T> {
    pub d_alpha: f64,
    pub d_i0: ImageGrid<T>,
    pub d_i1: ImageGrid<T>,
    pub d_flow: FlowField<T>,
}

fn check_shapes<T: Real>(
    i0: &ImageGrid<T>,
    i1: &ImageGrid<T>,
    flow01: &FlowField<T>,
) -> Result<()> {
    if i0.shape() != i1.shape() {
        return Err(invalid(format!(
            "frames differ in shape: {:?} vs {:?}",
            i0.shape(),
            i1.shape()
        )));
    }
    flow01.check_matches(i0.height(), i0.width(), "frame")
}

fn residual<T: Real>(
    exec: &Exec,
    i0: &ImageGrid<T>,
    i1: &ImageGrid<T>,
    flow01: &FlowField<T>,
) -> Result<Vec<T>> {
    let warped = exec.backward_warp(i1, flow01)?;
    Ok(i0
        .as_slice()
        .iter()
        .zip(warped.as_slice())
        .map(|(&a, &b)| a - b)
        .collect())
}

impl Exec {
    pub fn brightness_constancy<T: Real>(
        &self,
        i0: &ImageGrid<T>,
        i1: &ImageGrid<T>,
        flow01: &FlowField<T>,
        params: MetricParams,
    ) -> Result<ImportanceMap<T>> {
        check_shapes(i0, i1, flow01)?;
        let c = i0.channels();
        let alpha = T::from_f64(params.alpha);
        let r = residual(self, i0, i1, flow01)?;
        let z = r
            .chunks_exact(c)
            .map(|px| alpha * px.iter().map(|v| v.abs()).sum::<T>())
            .collect();
        ImportanceMap::from_computed(i0.height(), i0.width(), z)
    }

    pub fn brightness_constancy_backward<T: Real>(
        &self,
        i0: &ImageGrid<T>,
        i1: &ImageGrid<T>,
        flow01: &FlowField<T>,
        params: MetricParams,
        upstream: &ImportanceMap<T>,
    ) -> Result<MetricGradients<T>> {
        check_shapes(i0, i1, flow01)?;
        if upstream.height() != i0.height() || upstream.width() != i0.width() {
            return Err(invalid(format!(
                "upstream is {}x{} but frames are {}x{}",
                upstream.height(),
                upstream.width(),
                i0.height(),
                i0.width()
            )));
        }
        let (h, w, c) = i0.shape();
        let alpha = T::from_f64(params.alpha);
        let r = residual(self, i0, i1, flow01)?;
        let up = upstream.as_slice();

        let mut d_alpha = 0.0;
        let mut d_i0 = Vec::with_capacity(r.len());
        for (px, &g) in r.chunks_exact(c).zip(up) {
            let l1: T = px.iter().map(|v| v.abs()).sum();
            d_alpha += (g * l1).as_f64();
            // Subgradient 0 at zero residual.
            d_i0.extend(px.iter().map(|&v| {
                let s = if v == T::zero() {
                    T::zero()
                } else {
                    v.signum()
                };
                g * alpha * s
            }));
        }
        let d_warped: Vec<T> = d_i0.iter().map(|&v| -v).collect();
        let d_warped = ImageGrid::from_computed(h, w, c, d_warped)?;
        let (d_i1, d_flow) = self.backward_warp_backward(i1, flow01, &d_warped)?;
        if !d_alpha.is_finite() {
            return Err(crate::error::internal("non-finite alpha gradient"));
        }
        Ok(MetricGradients {
            d_alpha,
            d_i0: ImageGrid::from_computed(h, w, c, d_i0)?,
            d_i1,
            d_flow,
        })
    }
}

/// Importance map from brightness constancy between `i0` and `i1` warped back along `flow01`.
pub fn brightness_constancy<T: Real>(
    i0: &ImageGrid<T>,
    i1: &ImageGrid<T>,
    flow01: &FlowField<T>,
    params: MetricParams,
) -> Result<ImportanceMap<T>> {
    Exec::default().brightness_constancy(i0, i1, flow01, params)
}

pub fn brightness_constancy_backward<T: Real>(
    i0: &ImageGrid<T>,
    i1: &ImageGrid<T>,
    flow01: &FlowField<T>,
    params: MetricParams,
    upstream: &ImportanceMap<T>,
) -> Result<MetricGradients<T>> {
    Exec::default().brightness_constancy_backward(i0, i1, flow01, params, upstream)
}
