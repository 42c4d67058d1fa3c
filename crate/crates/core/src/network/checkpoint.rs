//! `CKPT` files: magic, `u32` LE header length, JSON index, then every
//! parameter blob as little-endian `f32` in index order.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use super::spec::ModelSpec;
use crate::container::{check_payload, decode, encode, payload_f32};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"CKPT";

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the payload.
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    spec: ModelSpec,
    dtype: String,
    tensors: Vec<TensorEntry>,
}

pub fn encode_checkpoint<T: Scalar>(params: &ModelParams<T>) -> Vec<u8> {
    let mut tensors = Vec::new();
    let mut payload = Vec::with_capacity(params.len());
    for (info, v) in params.layout().iter().zip(params.values()) {
        tensors.push(TensorEntry {
            name: info.name.clone(),
            shape: info.shape.clone(),
            offset: payload.len() * 4,
        });
        payload.extend(v.iter().map(|x| x.to_f32().expect("float narrows to f32")));
    }
    let header = CheckpointHeader {
        spec: *params.spec(),
        dtype: "f32".into(),
        tensors,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    encode(CHECKPOINT_MAGIC, &json, &payload)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParams<f32>> {
    let (header, payload) = decode(CHECKPOINT_MAGIC, bytes)?;
    let header: CheckpointHeader = serde_json::from_slice(header).map_err(|e| Error::Header(e.to_string()))?;
    if header.dtype != "f32" {
        return Err(Error::Header(format!("unsupported dtype {:?}", header.dtype)));
    }
    header.spec.validate()?;
    let total: usize = header
        .tensors
        .iter()
        .map(|t| t.shape.iter().product::<usize>() * 4)
        .sum();
    check_payload(total, payload.len())?;
    let mut named = HashMap::new();
    for t in header.tensors {
        let len = t.shape.iter().product::<usize>() * 4;
        let blob = t
            .offset
            .checked_add(len)
            .and_then(|end| payload.get(t.offset..end))
            .ok_or_else(|| Error::Header(format!("tensor {:?} lies outside the payload", t.name)))?;
        if named.insert(t.name.clone(), (t.shape, payload_f32(blob))).is_some() {
            return Err(Error::Header(format!("duplicate tensor {:?}", t.name)));
        }
    }
    let params = ModelParams::from_named(header.spec, named)?;
    params.validate()?;
    Ok(params)
}

pub fn save_checkpoint<T: Scalar>(params: &ModelParams<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
