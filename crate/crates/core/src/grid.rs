//! Dense grids, flow fields and importance maps.
//!
//! All grids are channels-last, row-major: element `(y, x, c)` lives at
//! `(y * width + x) * channels + c`. Pixel centers sit on integer
//! coordinates with `(0, 0)` at the top-left; a flow vector `(dx, dy)` is
//! added directly to the integer source coordinate, positive `dx` pointing
//! right and positive `dy` pointing down.

use crate::error::{internal, invalid, Result};
use crate::real::Real;

fn check_dims(height: usize, width: usize, channels: usize) -> Result<()> {
    if height == 0 || width == 0 || channels == 0 {
        return Err(invalid(format!(
            "grid dimensions must be positive, got {height}x{width}x{channels}"
        )));
    }
    Ok(())
}

fn check_finite<T: Real>(what: &str, data: &[T], channels: usize, width: usize) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => {
            let c = i % channels;
            let x = (i / channels) % width;
            let y = i / channels / width;
            Err(invalid(format!(
                "{what} contains non-finite value {} at (y={y}, x={x}, c={c})",
                data[i]
            )))
        }
    }
}

/// Validates a freshly computed result; any non-finite value is a library bug
/// or an overflow, never a caller error.
pub(crate) fn check_output<T: Real>(
    what: &str,
    data: &[T],
    channels: usize,
    width: usize,
) -> Result<()> {
    check_finite(what, data, channels, width).map_err(|e| internal(e.to_string()))
}

/// An `H x W x C` grid of finite samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid<T = f64> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> ImageGrid<T> {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        check_dims(height, width, channels)?;
        if data.len() != height * width * channels {
            return Err(invalid(format!(
                "grid data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        check_finite("grid", &data, channels, width)?;
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, fill: T) -> Result<Self> {
        check_dims(height, width, channels)?;
        if !fill.is_finite() {
            return Err(invalid(format!("fill value {fill} is not finite")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data: vec![fill; height * width * channels],
        })
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        check_dims(height, width, channels)?;
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    /// Wraps computed data, reporting non-finite values as internal errors.
    pub(crate) fn from_computed(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<T>,
    ) -> Result<Self> {
        debug_assert_eq!(data.len(), height * width * channels);
        check_output("computed grid", &data, channels, width)?;
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> T {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> &[T] {
        let i = self.index(y, x, 0);
        &self.data[i..i + self.channels]
    }

    /// Returns a copy with one element replaced.
    pub fn with_value(&self, y: usize, x: usize, c: usize, value: T) -> Result<Self> {
        if y >= self.height || x >= self.width || c >= self.channels {
            return Err(invalid(format!(
                "index ({y}, {x}, {c}) out of bounds for {:?}",
                self.shape()
            )));
        }
        if !value.is_finite() {
            return Err(invalid(format!("value {value} is not finite")));
        }
        let mut out = self.clone();
        let i = out.index(y, x, c);
        out.data[i] = value;
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(
            self.height,
            self.width,
            self.channels,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn cast<U: Real>(&self) -> ImageGrid<U> {
        ImageGrid {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    pub fn same_extent(&self, height: usize, width: usize) -> bool {
        self.height == height && self.width == width
    }
}

/// Builds a grid of the given shape with every element set to `fill`.
pub fn make_grid<T: Real>(
    height: usize,
    width: usize,
    channels: usize,
    fill: T,
) -> Result<ImageGrid<T>> {
    ImageGrid::filled(height, width, channels, fill)
}

/// Per-pixel displacement in pixels, stored interleaved as `(dx, dy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField<T = f64> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> FlowField<T> {
    /// `data` holds interleaved `(dx, dy)` pairs in row-major order.
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        check_dims(height, width, 1)?;
        if data.len() != height * width * 2 {
            return Err(invalid(format!(
                "flow data length {} does not match {height}x{width}x2",
                data.len()
            )));
        }
        check_finite("flow", &data, 2, width)?;
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn uniform(height: usize, width: usize, dx: T, dy: T) -> Result<Self> {
        Self::from_fn(height, width, |_, _| (dx, dy))
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::uniform(height, width, T::zero(), T::zero())
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> (T, T),
    ) -> Result<Self> {
        check_dims(height, width, 1)?;
        let mut data = Vec::with_capacity(height * width * 2);
        for y in 0..height {
            for x in 0..width {
                let (dx, dy) = f(y, x);
                data.push(dx);
                data.push(dy);
            }
        }
        Self::new(height, width, data)
    }

    pub(crate) fn from_computed(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        check_output("computed flow", &data, 2, width)?;
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> (T, T) {
        let i = (y * self.width + x) * 2;
        (self.data[i], self.data[i + 1])
    }

    pub fn scale(&self, s: T) -> Result<Self> {
        scale_flow(self, s)
    }

    pub fn cast<U: Real>(&self) -> FlowField<U> {
        FlowField {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    pub(crate) fn check_matches(&self, height: usize, width: usize, what: &str) -> Result<()> {
        if self.height != height || self.width != width {
            return Err(invalid(format!(
                "flow is {}x{} but {what} is {height}x{width}",
                self.height, self.width
            )));
        }
        Ok(())
    }
}

/// Multiplies every flow component by `s`, e.g. `t * F01` for the flow to time `t`.
pub fn scale_flow<T: Real>(flow: &FlowField<T>, s: T) -> Result<FlowField<T>> {
    if !s.is_finite() {
        return Err(invalid(format!("flow scale {s} is not finite")));
    }
    FlowField::from_computed(
        flow.height,
        flow.width,
        flow.data.iter().map(|&v| v * s).collect(),
    )
}

/// Single-channel per-pixel importance; larger values win collisions.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceMap<T = f64> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> ImportanceMap<T> {
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        check_dims(height, width, 1)?;
        if data.len() != height * width {
            return Err(invalid(format!(
                "importance data length {} does not match {height}x{width}",
                data.len()
            )));
        }
        check_finite("importance map", &data, 1, width)?;
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: T) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Result<Self> {
        check_dims(height, width, 1)?;
        let data = (0..height * width)
            .map(|i| f(i / width, i % width))
            .collect();
        Self::new(height, width, data)
    }

    pub(crate) fn from_computed(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        check_output("computed importance", &data, 1, width)?;
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> T {
        self.data[y * self.width + x]
    }

    /// `Z + beta`, elementwise.
    pub fn shifted(&self, beta: T) -> Result<Self> {
        Self::new(
            self.height,
            self.width,
            self.data.iter().map(|&z| z + beta).collect(),
        )
    }

    /// `alpha * Z`, elementwise.
    pub fn scaled(&self, alpha: T) -> Result<Self> {
        Self::new(
            self.height,
            self.width,
            self.data.iter().map(|&z| z * alpha).collect(),
        )
    }

    pub fn cast<U: Real>(&self) -> ImportanceMap<U> {
        ImportanceMap {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    pub fn to_grid(&self) -> ImageGrid<T> {
        ImageGrid {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.data.clone(),
        }
    }

    pub fn from_grid(grid: &ImageGrid<T>) -> Result<Self> {
        if grid.channels() != 1 {
            return Err(invalid(format!(
                "importance map needs a single-channel grid, got {} channels",
                grid.channels()
            )));
        }
        Ok(Self {
            height: grid.height(),
            width: grid.width(),
            data: grid.as_slice().to_vec(),
        })
    }
}

/// A warped grid together with its splatted normalization weights.
///
/// `weight` is zero exactly at holes, and `warped` is zero there too.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpOutput<T = f64> {
    pub warped: ImageGrid<T>,
    pub weight: ImageGrid<T>,
}

impl<T: Real> WarpOutput<T> {
    pub fn is_hole(&self, y: usize, x: usize) -> bool {
        self.weight.get(y, x, 0) == T::zero()
    }

    pub fn hole_count(&self) -> usize {
        self.weight
            .as_slice()
            .iter()
            .filter(|w| **w == T::zero())
            .count()
    }
}

/// Gradients of a scalar loss with respect to the inputs of a splat.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle<T = f64> {
    pub d_source: ImageGrid<T>,
    pub d_flow: FlowField<T>,
    /// Present only for modes that take an importance map.
    pub d_importance: Option<ImportanceMap<T>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn make_grid_shapes() {
        let g = make_grid(2, 2, 1, 0.0f64).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
        let ones = make_grid(3, 4, 3, 1.0f64).unwrap();
        assert_eq!(ones.len(), 36);
        assert!(ones.as_slice().iter().all(|&v| v == 1.0));
        let single = make_grid(1, 1, 1, 0.5f32).unwrap();
        assert_eq!(single.shape(), (1, 1, 1));
        assert_eq!(single.get(0, 0, 0), 0.5);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(
            make_grid(0, 2, 1, 0.0f64),
            Err(crate::WarpError::InvalidArgument(_))
        ));
        assert!(make_grid(2, 0, 1, 0.0f64).is_err());
        assert!(make_grid(2, 2, 0, 0.0f64).is_err());
    }

    #[test]
    fn constructors_reject_non_finite() {
        assert!(make_grid(1, 1, 1, f64::NAN).is_err());
        assert!(ImageGrid::new(1, 2, 1, vec![0.0, f64::INFINITY]).is_err());
        assert!(FlowField::new(1, 1, vec![f32::NAN, 0.0]).is_err());
        assert!(ImportanceMap::new(1, 1, vec![f64::NEG_INFINITY]).is_err());
        assert!(ImageGrid::new(2, 2, 1, vec![0.0f64; 3]).is_err());
    }

    #[test]
    fn error_names_the_bad_coordinate() {
        let mut data = vec![0.0f64; 12];
        data[7] = f64::NAN;
        let msg = ImageGrid::new(2, 2, 3, data).unwrap_err().to_string();
        assert!(msg.contains("y=1, x=0, c=1"), "{msg}");
    }

    #[test]
    fn scale_flow_examples() {
        let f = FlowField::uniform(2, 3, 2.0f64, 0.0).unwrap();
        let half = scale_flow(&f, 0.5).unwrap();
        assert!(half
            .as_slice()
            .chunks(2)
            .all(|d| d[0] == 1.0 && d[1] == 0.0));

        let zero = scale_flow(&f, 0.0).unwrap();
        assert!(zero.as_slice().iter().all(|&v| v == 0.0));

        let g = FlowField::uniform(2, 2, 3.0f64, -1.0).unwrap();
        assert_eq!(scale_flow(&g, 1.0).unwrap(), g);
        assert!(scale_flow(&g, f64::INFINITY).is_err());
    }

    fn ulp_distance(a: f64, b: f64) -> u64 {
        if a == b {
            return 0;
        }
        let key = |v: f64| {
            let bits = v.to_bits() as i64;
            if bits < 0 {
                i64::MIN - bits
            } else {
                bits
            }
        };
        key(a).abs_diff(key(b))
    }

    proptest! {
        // Two roundings on one side against two on the other bound the gap
        // at two ulps; one ulp is not attainable in IEEE arithmetic.
        #[test]
        fn scale_flow_composes(
            vals in proptest::collection::vec(-100.0f64..100.0, 2..16),
            a in -4.0f64..4.0,
            b in -4.0f64..4.0,
        ) {
            let n = vals.len() / 2;
            let flow = FlowField::new(1, n, vals[..2 * n].to_vec()).unwrap();
            let twice = scale_flow(&scale_flow(&flow, a).unwrap(), b).unwrap();
            let once = scale_flow(&flow, a * b).unwrap();
            for (l, r) in twice.as_slice().iter().zip(once.as_slice()) {
                prop_assert!(ulp_distance(*l, *r) <= 2, "{l} vs {r}");
            }
        }
    }

    #[test]
    fn importance_helpers() {
        let z = ImportanceMap::from_fn(2, 2, |y, x| (y * 2 + x) as f64).unwrap();
        assert_eq!(z.shifted(1.0).unwrap().get(1, 1), 4.0);
        assert_eq!(z.scaled(-1.0).unwrap().get(0, 1), -1.0);
        let g = z.to_grid();
        assert_eq!(ImportanceMap::from_grid(&g).unwrap(), z);
        assert!(ImportanceMap::from_grid(&make_grid(2, 2, 3, 0.0).unwrap()).is_err());
    }
}
