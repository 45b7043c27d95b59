//! Hard z-buffer splatting: every target keeps only its most important source.

use crate::error::{Result, WarpError};
use crate::grid::{FlowField, ImageGrid, ImportanceMap, WarpOutput};
use crate::real::Real;
use crate::splat::{check_inputs, SplatMode};

use super::gather::literal_weight;

/// Each output pixel takes the value of the highest-`Z` source whose
/// footprint covers it; all other contributions are discarded.
///
/// `weight` holds the kernel weight of the winning footprint. A tie for the
/// highest `Z` at a pixel with several contributors is rejected.
pub fn zbuffer_oracle<T: Real>(
    source: &ImageGrid<T>,
    flow: &FlowField<T>,
    z: &ImportanceMap<T>,
) -> Result<WarpOutput<T>> {
    check_inputs(source, flow, SplatMode::Softmax, Some(z))?;
    let (h, w, c) = source.shape();
    let eps = T::HOLE_EPSILON.as_f64();

    let mut warped = Vec::with_capacity(h * w * c);
    let mut weight = Vec::with_capacity(h * w);
    for py in 0..h {
        for px in 0..w {
            let mut coverage = 0.0;
            let mut contributors = 0usize;
            let mut best: Option<(usize, usize, f64)> = None;
            let mut tied = false;
            for qy in 0..h {
                for qx in 0..w {
                    let b = literal_weight(flow, py, px, qy, qx);
                    if b == 0.0 {
                        continue;
                    }
                    coverage += b;
                    contributors += 1;
                    let zq = z.get(qy, qx);
                    match best {
                        Some((by, bx, _)) if zq < z.get(by, bx) => {}
                        Some((by, bx, _)) if zq == z.get(by, bx) => tied = true,
                        _ => {
                            best = Some((qy, qx, b));
                            tied = false;
                        }
                    }
                }
            }
            if tied && contributors > 1 {
                return Err(WarpError::AmbiguousInput(format!(
                    "importance tie for the front-most source at pixel (y={py}, x={px})"
                )));
            }
            match best {
                Some((qy, qx, b)) if coverage > eps => {
                    warped.extend_from_slice(source.pixel(qy, qx));
                    weight.push(T::from_f64(b));
                }
                _ => {
                    warped.extend(std::iter::repeat_n(T::zero(), c));
                    weight.push(T::zero());
                }
            }
        }
    }
    Ok(WarpOutput {
        warped: ImageGrid::new(h, w, c, warped)?,
        weight: ImageGrid::new(h, w, 1, weight)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splat::splat_average;

    #[test]
    fn front_most_source_wins() {
        let src = ImageGrid::new(1, 2, 1, vec![0.2, 0.9]).unwrap();
        let flow = FlowField::new(1, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let z = ImportanceMap::new(1, 2, vec![1.0, 10.0]).unwrap();
        let out = zbuffer_oracle(&src, &flow, &z).unwrap();
        assert_eq!(out.warped.get(0, 1, 0), 0.9);
        let z = ImportanceMap::new(1, 2, vec![10.0, 1.0]).unwrap();
        assert_eq!(
            zbuffer_oracle(&src, &flow, &z).unwrap().warped.get(0, 1, 0),
            0.2
        );
    }

    #[test]
    fn without_collisions_equals_average() {
        let src = ImageGrid::from_fn(4, 4, 2, |y, x, c| (y * 4 + x + c) as f64 / 20.0).unwrap();
        let flow = FlowField::uniform(4, 4, 1.0, -1.0).unwrap();
        let z = ImportanceMap::from_fn(4, 4, |y, x| (y * 4 + x) as f64).unwrap();
        let zb = zbuffer_oracle(&src, &flow, &z).unwrap();
        let avg = splat_average(&src, &flow).unwrap();
        assert_eq!(zb.warped, avg.warped);
    }

    #[test]
    fn ties_are_rejected() {
        let src = ImageGrid::new(1, 2, 1, vec![0.2, 0.9]).unwrap();
        let flow = FlowField::new(1, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let z = ImportanceMap::new(1, 2, vec![3.0, 3.0]).unwrap();
        assert!(matches!(
            zbuffer_oracle(&src, &flow, &z),
            Err(WarpError::AmbiguousInput(_))
        ));
        // A tie with no collision is fine.
        let flow = FlowField::zeros(1, 2).unwrap();
        assert!(zbuffer_oracle(&src, &flow, &z).is_ok());
    }
}
