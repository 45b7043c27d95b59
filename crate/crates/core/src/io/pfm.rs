//! Portable float maps: `Pf` (one channel) or `PF` (three), a size line, a
//! scale whose sign gives the byte order (negative = little-endian), then
//! `f32` rows stored bottom to top.
//!
//! A scale magnitude other than 1 multiplies every value on read. Writing
//! always uses scale `-1`.

use std::path::Path;

use super::{format_error, read_bytes, write_bytes};
use crate::error::{invalid, Result};
use crate::grid::{ImageGrid, ImportanceMap};
use crate::real::Real;

pub fn encode_pfm<T: Real>(grid: &ImageGrid<T>) -> Result<Vec<u8>> {
    let (h, w, c) = grid.shape();
    let tag = match c {
        1 => "Pf",
        3 => "PF",
        _ => return Err(invalid(format!("PFM stores 1 or 3 channels, not {c}"))),
    };
    let mut out = format!("{tag}\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(grid.len() * 4);
    for y in (0..h).rev() {
        for v in &grid.as_slice()[y * w * c..(y + 1) * w * c] {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Splits off the next whitespace-delimited header token.
fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .filter(|s| !s.is_empty())
}

/// Parses PFM bytes; `path` only labels errors.
pub fn decode_pfm(bytes: &[u8], path: &Path) -> Result<ImageGrid<f32>> {
    let mut pos = 0;
    let channels = match token(bytes, &mut pos) {
        Some("Pf") => 1,
        Some("PF") => 3,
        other => {
            return Err(format_error(
                path,
                format!(
                    "bad PFM header {:?}, expected \"Pf\" or \"PF\"",
                    other.unwrap_or("")
                ),
            ))
        }
    };
    let mut number = |what: &str| {
        token(bytes, &mut pos)
            .ok_or_else(|| format_error(path, format!("missing PFM {what}")))
            .map(str::to_owned)
    };
    let w: usize = number("width")?
        .parse()
        .map_err(|_| format_error(path, "unparseable PFM width"))?;
    let h: usize = number("height")?
        .parse()
        .map_err(|_| format_error(path, "unparseable PFM height"))?;
    let scale: f32 = number("scale")?
        .parse()
        .map_err(|_| format_error(path, "unparseable PFM scale"))?;
    if w == 0 || h == 0 {
        return Err(format_error(path, format!("invalid PFM size {w}x{h}")));
    }
    if scale == 0.0 || !scale.is_finite() {
        return Err(format_error(path, format!("invalid PFM scale {scale}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(channels * 4))
        .unwrap_or(usize::MAX);
    let payload = bytes.get(pos..).unwrap_or(&[]);
    if payload.len() != expected {
        return Err(format_error(
            path,
            format!(
                "PFM payload: expected {expected} bytes for {w}x{h}x{channels}, found {}",
                payload.len()
            ),
        ));
    }
    let little = scale < 0.0;
    let factor = scale.abs();
    let row = w * channels;
    let mut data = vec![0f32; h * row];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let b: [u8; 4] = chunk.try_into().unwrap();
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let (file_row, col) = (i / row, i % row);
        data[(h - 1 - file_row) * row + col] = if factor == 1.0 { v } else { v * factor };
    }
    ImageGrid::new(h, w, channels, data).map_err(|e| format_error(path, e.to_string()))
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<ImageGrid<f32>> {
    let path = path.as_ref();
    decode_pfm(&read_bytes(path)?, path)
}

/// Writes a 1- or 3-channel grid, rounding to single precision.
pub fn write_pfm<T: Real>(grid: &ImageGrid<T>, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pfm(grid)?)
}

pub fn read_importance(path: impl AsRef<Path>) -> Result<ImportanceMap<f32>> {
    let path = path.as_ref();
    let grid = read_pfm(path)?;
    if grid.channels() != 1 {
        return Err(format_error(
            path,
            "importance maps must be single-channel (Pf) PFM files",
        ));
    }
    ImportanceMap::from_grid(&grid)
}

pub fn write_importance<T: Real>(z: &ImportanceMap<T>, path: impl AsRef<Path>) -> Result<()> {
    write_pfm(&z.to_grid(), path)
}
