//! The separable bilinear (tent) splatting kernel.

use crate::real::Real;

/// Kernel weight at offset `u = p - (q + F[q])` and its derivatives with
/// respect to the flow components `F[q]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearKernelValue<T> {
    pub weight: T,
    /// `d weight / d F^x`.
    pub d_weight_dx: T,
    /// `d weight / d F^y`.
    pub d_weight_dy: T,
}

#[inline]
fn tent<T: Real>(u: T) -> T {
    (T::one() - u.abs()).max(T::zero())
}

/// Derivative of `tent(u(F))` with respect to `F`, where `u = p - q - F`.
///
/// Zero for `|u| >= 1` and `sgn(u)` otherwise, with `sgn(0) = 0`. The tent
/// is not differentiable at `u in {-1, 0, 1}`; these one-sided choices are
/// the convention, and gradient checks stay clear of them.
#[inline]
fn tent_flow_slope<T: Real>(u: T) -> T {
    if u.abs() >= T::one() || u == T::zero() {
        T::zero()
    } else {
        u.signum()
    }
}

#[inline]
pub fn bilinear_weight<T: Real>(ux: T, uy: T) -> T {
    tent(ux) * tent(uy)
}

#[inline]
pub fn bilinear_kernel<T: Real>(ux: T, uy: T) -> BilinearKernelValue<T> {
    let wx = tent(ux);
    let wy = tent(uy);
    BilinearKernelValue {
        weight: wx * wy,
        d_weight_dx: wy * tent_flow_slope(ux),
        d_weight_dy: wx * tent_flow_slope(uy),
    }
}

/// The up-to-four integer targets of a splat landing at `(x, y)`.
///
/// Yields `(px, py, ux, uy)` for each corner whose kernel weight is nonzero;
/// coordinates may lie outside the grid and must be bounds-checked by the
/// caller.
#[inline]
pub(crate) fn footprint<T: Real>(x: T, y: T) -> impl Iterator<Item = (i64, i64, T, T)> {
    let x0 = x.floor();
    let y0 = y.floor();
    let bx = x0.to_i64().unwrap_or(i64::MIN / 4);
    let by = y0.to_i64().unwrap_or(i64::MIN / 4);
    [(0i64, 0i64), (1, 0), (0, 1), (1, 1)]
        .into_iter()
        .filter_map(move |(ox, oy)| {
            let ux = (x0 + T::from_f64(ox as f64)) - x;
            let uy = (y0 + T::from_f64(oy as f64)) - y;
            if ux.abs() >= T::one() || uy.abs() >= T::one() {
                None
            } else {
                Some((bx + ox, by + oy, ux, uy))
            }
        })
}
