//! Bilinear backward warping: `out[p] = source(p + flow[p])`.
//!
//! Corners outside the grid read as zero, so a sample that leaves the
//! grid entirely yields zero.

use crate::error::Result;
use crate::grid::{FlowField, ImageGrid};
use crate::kernel::bilinear_kernel;
use crate::real::Real;
use crate::splat::{for_each_row, scatter, targets, Exec};

impl Exec {
    pub fn backward_warp<T: Real>(
        &self,
        source: &ImageGrid<T>,
        flow: &FlowField<T>,
    ) -> Result<ImageGrid<T>> {
        flow.check_matches(source.height(), source.width(), "source")?;
        let (h, w, c) = source.shape();
        let src = source.as_slice();
        let mut out = vec![T::zero(); h * w * c];
        for_each_row(self, &mut out, w * c, |y, row| {
            for x in 0..w {
                let dst = &mut row[x * c..(x + 1) * c];
                for t in targets(flow, y, x) {
                    let b = bilinear_kernel(t.ux, t.uy).weight;
                    for (o, &v) in dst.iter_mut().zip(&src[t.pixel * c..(t.pixel + 1) * c]) {
                        *o += b * v;
                    }
                }
            }
        });
        ImageGrid::from_computed(h, w, c, out)
    }

    /// Gradients of `backward_warp` with respect to its source and flow.
    ///
    /// The source adjoint of sampling is summation splatting of `upstream`
    /// along the same flow.
    pub fn backward_warp_backward<T: Real>(
        &self,
        source: &ImageGrid<T>,
        flow: &FlowField<T>,
        upstream: &ImageGrid<T>,
    ) -> Result<(ImageGrid<T>, FlowField<T>)> {
        flow.check_matches(source.height(), source.width(), "source")?;
        if upstream.shape() != source.shape() {
            return Err(crate::error::invalid(format!(
                "upstream gradient is {:?} but the sampled output is {:?}",
                upstream.shape(),
                source.shape()
            )));
        }
        let (h, w, c) = source.shape();
        let g = upstream.as_slice();
        let src = source.as_slice();

        let d_source = scatter(self, flow, c, |p, t, slot| {
            let b = bilinear_kernel(t.ux, t.uy).weight;
            for (s, &v) in slot.iter_mut().zip(&g[p * c..(p + 1) * c]) {
                *s += b * v;
            }
        });

        let mut d_flow = vec![T::zero(); h * w * 2];
        for_each_row(self, &mut d_flow, w * 2, |y, row| {
            for x in 0..w {
                let p = y * w + x;
                let gp = &g[p * c..(p + 1) * c];
                for t in targets(flow, y, x) {
                    let k = bilinear_kernel(t.ux, t.uy);
                    let dot: T = gp
                        .iter()
                        .zip(&src[t.pixel * c..(t.pixel + 1) * c])
                        .map(|(&a, &b)| a * b)
                        .sum();
                    row[2 * x] += k.d_weight_dx * dot;
                    row[2 * x + 1] += k.d_weight_dy * dot;
                }
            }
        });
        Ok((
            ImageGrid::from_computed(h, w, c, d_source)?,
            FlowField::from_computed(h, w, d_flow)?,
        ))
    }
}

/// Bilinearly samples `source` at `p + flow[p]` for every pixel `p`.
pub fn backward_warp<T: Real>(source: &ImageGrid<T>, flow: &FlowField<T>) -> Result<ImageGrid<T>> {
    Exec::default().backward_warp(source, flow)
}

pub fn backward_warp_backward<T: Real>(
    source: &ImageGrid<T>,
    flow: &FlowField<T>,
    upstream: &ImageGrid<T>,
) -> Result<(ImageGrid<T>, FlowField<T>)> {
    Exec::default().backward_warp_backward(source, flow, upstream)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct bilinear interpolation with zero padding, written independently
    /// of the footprint iterator.
    fn sample_brute(src: &ImageGrid<f64>, x: f64, y: f64, c: usize) -> f64 {
        let mut acc = 0.0;
        for ty in 0..src.height() {
            for tx in 0..src.width() {
                let wx = (1.0 - (tx as f64 - x).abs()).max(0.0);
                let wy = (1.0 - (ty as f64 - y).abs()).max(0.0);
                acc += wx * wy * src.get(ty, tx, c);
            }
        }
        acc
    }

    #[test]
    fn zero_flow_is_identity() {
        let src =
            ImageGrid::from_fn(4, 5, 3, |y, x, c| (y * 13 + x * 7 + c) as f64 / 37.0).unwrap();
        let out = backward_warp(&src, &FlowField::zeros(4, 5).unwrap()).unwrap();
        assert_eq!(out, src);
    }

    #[test]
    fn integer_shift_with_zero_padding() {
        let src = ImageGrid::new(2, 2, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let flow = FlowField::uniform(2, 2, 1.0, 0.0).unwrap();
        let out = backward_warp(&src, &flow).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 0.0, 3.0, 0.0]);
        for y in 0..2 {
            for x in 0..2 {
                assert_eq!(
                    out.get(y, x, 0),
                    sample_brute(&src, x as f64 + 1.0, y as f64, 0)
                );
            }
        }
    }

    #[test]
    fn half_pixel_on_ramp_is_midpoint() {
        let src = ImageGrid::from_fn(3, 6, 1, |_, x, _| 0.5 + 2.0 * x as f64).unwrap();
        let flow = FlowField::uniform(3, 6, 0.5, 0.0).unwrap();
        let out = backward_warp(&src, &flow).unwrap();
        for y in 0..3 {
            for x in 0..5 {
                let mid = 0.5 * (src.get(y, x, 0) + src.get(y, x + 1, 0));
                assert!((out.get(y, x, 0) - mid).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn matches_brute_force_sampler() {
        let src = ImageGrid::from_fn(5, 4, 2, |y, x, c| {
            ((y * 3 + x * 5 + c * 2) % 7) as f64 / 7.0
        })
        .unwrap();
        let flow = FlowField::from_fn(5, 4, |y, x| (0.37 * x as f64 - 1.2, 0.81 - 0.43 * y as f64))
            .unwrap();
        let out = backward_warp(&src, &flow).unwrap();
        for y in 0..5 {
            for x in 0..4 {
                let (dx, dy) = flow.get(y, x);
                for c in 0..2 {
                    let expect = sample_brute(&src, x as f64 + dx, y as f64 + dy, c);
                    assert!((out.get(y, x, c) - expect).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn fully_outside_samples_are_zero() {
        let src = ImageGrid::filled(3, 3, 1, 1.0).unwrap();
        let flow = FlowField::uniform(3, 3, -5.0, 0.5).unwrap();
        assert!(backward_warp(&src, &flow)
            .unwrap()
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn adjoint_identity() {
        // <warp(I), G> == <I, d_source(G)> for the linear map I -> warp(I).
        let src =
            ImageGrid::from_fn(4, 4, 2, |y, x, c| ((y + 2 * x + 3 * c) % 5) as f64 - 2.0).unwrap();
        let up = ImageGrid::from_fn(4, 4, 2, |y, x, c| ((3 * y + x + c) % 4) as f64 * 0.5).unwrap();
        let flow =
            FlowField::from_fn(4, 4, |y, x| (0.3 * y as f64 - 0.6, 0.7 - 0.2 * x as f64)).unwrap();
        let out = backward_warp(&src, &flow).unwrap();
        let (d_src, _) = backward_warp_backward(&src, &flow, &up).unwrap();
        let lhs: f64 = out
            .as_slice()
            .iter()
            .zip(up.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        let rhs: f64 = src
            .as_slice()
            .iter()
            .zip(d_src.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
