//! 8- and 16-bit grayscale or RGB PNG frames mapped to `[0, 1]`.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, ImageReader, Luma, Rgb};

use super::{format_error, io_error};
use crate::error::{invalid, Result};
use crate::grid::ImageGrid;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

fn scaled<T: Real>(v: impl Into<f64>, max: f64) -> T {
    T::from_f64(v.into() / max)
}

/// Reads a grayscale or RGB PNG, 8 or 16 bits per sample.
pub fn read_image<T: Real>(path: impl AsRef<Path>) -> Result<ImageGrid<T>> {
    let path = path.as_ref();
    let reader = ImageReader::open(path).map_err(|e| io_error(path, e))?;
    let img = reader
        .with_guessed_format()
        .map_err(|e| io_error(path, e))?
        .decode()
        .map_err(|e| match e {
            image::ImageError::IoError(e) => io_error(path, e),
            e => format_error(path, e.to_string()),
        })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, data): (usize, Vec<T>) = match img {
        DynamicImage::ImageLuma8(b) => (
            1,
            b.into_raw().into_iter().map(|v| scaled(v, 255.0)).collect(),
        ),
        DynamicImage::ImageRgb8(b) => (
            3,
            b.into_raw().into_iter().map(|v| scaled(v, 255.0)).collect(),
        ),
        DynamicImage::ImageLuma16(b) => (
            1,
            b.into_raw()
                .into_iter()
                .map(|v| scaled(v, 65535.0))
                .collect(),
        ),
        DynamicImage::ImageRgb16(b) => (
            3,
            b.into_raw()
                .into_iter()
                .map(|v| scaled(v, 65535.0))
                .collect(),
        ),
        other => {
            return Err(format_error(
                path,
                format!(
                    "unsupported color type {:?}; expected 8/16-bit grayscale or RGB",
                    other.color()
                ),
            ))
        }
    };
    ImageGrid::new(h, w, channels, data)
}

fn quantize<T: Real>(v: T, max: f64) -> f64 {
    // f64::round rounds half away from zero.
    (v.as_f64().clamp(0.0, 1.0) * max).round()
}

/// Writes a 1-channel grid as grayscale or a 3-channel grid as RGB PNG,
/// clamping to `[0, 1]` before quantizing.
pub fn write_image<T: Real>(
    grid: &ImageGrid<T>,
    path: impl AsRef<Path>,
    depth: BitDepth,
) -> Result<()> {
    let path = path.as_ref();
    let (h, w, c) = grid.shape();
    let (w32, h32) = (w as u32, h as u32);
    let src = grid.as_slice();
    let result = match (c, depth) {
        (1, BitDepth::Eight) => {
            let raw = src.iter().map(|&v| quantize(v, 255.0) as u8).collect();
            ImageBuffer::<Luma<u8>, Vec<u8>>::from_raw(w32, h32, raw)
                .map(|b| b.save_with_format(path, ImageFormat::Png))
        }
        (3, BitDepth::Eight) => {
            let raw = src.iter().map(|&v| quantize(v, 255.0) as u8).collect();
            ImageBuffer::<Rgb<u8>, Vec<u8>>::from_raw(w32, h32, raw)
                .map(|b| b.save_with_format(path, ImageFormat::Png))
        }
        (1, BitDepth::Sixteen) => {
            let raw = src.iter().map(|&v| quantize(v, 65535.0) as u16).collect();
            ImageBuffer::<Luma<u16>, Vec<u16>>::from_raw(w32, h32, raw)
                .map(|b| b.save_with_format(path, ImageFormat::Png))
        }
        (3, BitDepth::Sixteen) => {
            let raw = src.iter().map(|&v| quantize(v, 65535.0) as u16).collect();
            ImageBuffer::<Rgb<u16>, Vec<u16>>::from_raw(w32, h32, raw)
                .map(|b| b.save_with_format(path, ImageFormat::Png))
        }
        _ => {
            return Err(invalid(format!(
                "images are written with 1 or 3 channels, not {c}"
            )))
        }
    };
    match result {
        Some(Ok(())) => Ok(()),
        Some(Err(image::ImageError::IoError(e))) => Err(io_error(path, e)),
        Some(Err(e)) => Err(format_error(path, e.to_string())),
        None => Err(crate::error::internal("image buffer size mismatch")),
    }
}
