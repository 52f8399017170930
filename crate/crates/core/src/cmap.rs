//! Binary confidence-map files.
//!
//! Layout: the bytes `CMAP`, a version byte (1), width and height as `u32`
//! little endian, then `width·height` row-major `f64` little endian.

use std::path::Path;

use crate::error::{Error, Result};
use crate::postproc::ConfidenceMap;

pub const MAGIC: &[u8; 4] = b"CMAP";
pub const VERSION: u8 = 1;
const HEADER: usize = 13;

pub fn encode(map: &ConfidenceMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 8 * map.values().len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(map.width() as u32).to_le_bytes());
    out.extend_from_slice(&(map.height() as u32).to_le_bytes());
    for v in map.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ConfidenceMap> {
    if bytes.len() < HEADER || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing CMAP header".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!("unsupported version {}", bytes[4])));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let (width, height) = (u32_at(5), u32_at(9));
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    if bytes.len() != HEADER + 8 * n {
        return Err(Error::Format(format!(
            "{width}x{height} map needs {} bytes, file has {}",
            HEADER + 8 * n,
            bytes.len()
        )));
    }
    let values = bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ConfidenceMap::new(height, width, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn save(map: &ConfidenceMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(map)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<ConfidenceMap> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
