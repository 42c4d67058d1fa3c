//! Magic + JSON header + little-endian `f32` payload container used by both
//! raster (`RSTR`) and checkpoint (`CKPT`) files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

pub const RASTER_MAGIC: [u8; 4] = *b"RSTR";

pub(crate) fn encode(magic: [u8; 4], header: &[u8], payload: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + header.len() + payload.len() * 4);
    out.extend_from_slice(&magic);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header);
    for v in payload {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    out
}

/// Split a container into its header bytes and raw payload bytes.
pub(crate) fn decode(magic: [u8; 4], bytes: &[u8]) -> Result<(&[u8], &[u8])> {
    if bytes.len() < 8 {
        return Err(Error::Truncated {
            needed: 8,
            found: bytes.len(),
        });
    }
    let found: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
    if found != magic {
        return Err(Error::BadMagic { expected: magic, found });
    }
    let len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let end = 8usize
        .checked_add(len)
        .ok_or_else(|| Error::Header("header length overflow".into()))?;
    if bytes.len() < end {
        return Err(Error::Truncated {
            needed: end,
            found: bytes.len(),
        });
    }
    Ok((&bytes[8..end], &bytes[end..]))
}

pub(crate) fn payload_f32(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_bits(u32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect()
}

/// Payload byte count check shared by both formats: short payloads are
/// truncation, anything else that disagrees is a length mismatch.
pub(crate) fn check_payload(expected: usize, found: usize) -> Result<()> {
    if found < expected {
        Err(Error::Truncated {
            needed: expected,
            found,
        })
    } else if found != expected {
        Err(Error::LengthMismatch { expected, found })
    } else {
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct RasterHeader {
    width: u64,
    height: u64,
    channels: u64,
    dtype: String,
    layout: String,
}

const DTYPE: &str = "f32";
const LAYOUT: &str = "row-major-channel-last";

pub fn encode_raster(raster: &Raster<f32>) -> Vec<u8> {
    let header = RasterHeader {
        width: raster.width() as u64,
        height: raster.height() as u64,
        channels: raster.channels() as u64,
        dtype: DTYPE.into(),
        layout: LAYOUT.into(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    encode(RASTER_MAGIC, &json, raster.data())
}

pub fn decode_raster(bytes: &[u8]) -> Result<Raster<f32>> {
    let (header, payload) = decode(RASTER_MAGIC, bytes)?;
    let header: RasterHeader = serde_json::from_slice(header).map_err(|e| Error::Header(e.to_string()))?;
    if header.dtype != DTYPE || header.layout != LAYOUT {
        return Err(Error::Header(format!(
            "unsupported dtype/layout {:?}/{:?}",
            header.dtype, header.layout
        )));
    }
    let count = header
        .width
        .checked_mul(header.height)
        .and_then(|v| v.checked_mul(header.channels))
        .and_then(|v| v.checked_mul(4))
        .and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| Error::Header("raster size overflow".into()))?;
    check_payload(count, payload.len())?;
    Raster::new(
        header.width as usize,
        header.height as usize,
        header.channels as usize,
        payload_f32(payload),
    )
}

/// Write a `.rst` raster file.
pub fn write_raster(raster: &Raster<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_raster(raster)).map_err(|e| Error::io(path, e))
}

/// Read a `.rst` raster file.
pub fn read_raster(path: impl AsRef<Path>) -> Result<Raster<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_raster(&bytes)
}
