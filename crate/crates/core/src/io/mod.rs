//! File formats: Middlebury `.flo` flows, PFM float maps and 8/16-bit PNG frames.

mod flo;
mod pfm;
mod raster;

use std::path::Path;

use crate::error::WarpError;

pub use flo::{decode_flo, encode_flo, read_flo, write_flo, FLO_MAGIC};
pub use pfm::{decode_pfm, encode_pfm, read_importance, read_pfm, write_importance, write_pfm};
pub use raster::{read_image, write_image, BitDepth};

fn format_error(path: &Path, message: impl Into<String>) -> WarpError {
    WarpError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> WarpError {
    WarpError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_bytes(path: &Path) -> crate::Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| io_error(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> crate::Result<()> {
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}
