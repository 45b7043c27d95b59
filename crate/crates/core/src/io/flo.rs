//! Middlebury `.flo`: the float `202021.25`, then `i32` width and height,
//! then row-major interleaved `(dx, dy)` as `f32`, all little-endian.

use std::path::Path;

use super::{format_error, read_bytes, write_bytes};
use crate::error::Result;
use crate::grid::FlowField;
use crate::real::Real;

pub const FLO_MAGIC: f32 = 202021.25;
const HEADER: usize = 12;

fn hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn encode_flo<T: Real>(flow: &FlowField<T>) -> Result<Vec<u8>> {
    let (w, h) = (flow.width(), flow.height());
    let (wi, hi) = match (i32::try_from(w), i32::try_from(h)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => {
            return Err(crate::error::invalid(format!(
                "{w}x{h} flow is too large for .flo"
            )))
        }
    };
    let mut out = Vec::with_capacity(HEADER + flow.as_slice().len() * 4);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&wi.to_le_bytes());
    out.extend_from_slice(&hi.to_le_bytes());
    for v in flow.as_slice() {
        out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    Ok(out)
}

/// Parses `.flo` bytes; `path` only labels errors.
pub fn decode_flo(bytes: &[u8], path: &Path) -> Result<FlowField<f32>> {
    if bytes.len() < 4 || f32::from_le_bytes(bytes[..4].try_into().unwrap()) != FLO_MAGIC {
        return Err(format_error(
            path,
            format!(
                "bad .flo magic: found bytes [{}], expected [{}]",
                hex(&bytes[..bytes.len().min(4)]),
                hex(&FLO_MAGIC.to_le_bytes())
            ),
        ));
    }
    if bytes.len() < HEADER {
        return Err(format_error(
            path,
            format!(
                "truncated .flo header: expected {HEADER} bytes, found {}",
                bytes.len()
            ),
        ));
    }
    let w = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let h = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if w <= 0 || h <= 0 {
        return Err(format_error(path, format!("invalid .flo size {w}x{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(8))
        .unwrap_or(usize::MAX);
    let payload = &bytes[HEADER..];
    if payload.len() != expected {
        let what = if payload.len() < expected {
            "truncated"
        } else {
            "oversized"
        };
        return Err(format_error(
            path,
            format!(
                "{what} .flo payload: expected {expected} bytes for {w}x{h}, found {}",
                payload.len()
            ),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FlowField::new(h, w, data).map_err(|e| format_error(path, e.to_string()))
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField<f32>> {
    let path = path.as_ref();
    decode_flo(&read_bytes(path)?, path)
}

/// Writes `flow` as `.flo`, rounding to single precision.
pub fn write_flo<T: Real>(flow: &FlowField<T>, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_flo(flow)?)
}
