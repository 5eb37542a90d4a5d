//! Checkpoint file format.
//!
//! Layout: magic bytes `STN1`, a little-endian u64 byte count, a JSON
//! manifest (layer names and shapes plus normalization statistics), then
//! the raw parameter values as little-endian 64-bit floats in manifest
//! order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stnet::model::{param_layout, ModelParams, NormStats, N_OUTPUTS};

const MAGIC: &[u8; 4] = b"STN1";

#[derive(Serialize, Deserialize)]
struct LayerManifest {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct NormManifest {
    out_mean: [f64; N_OUTPUTS],
    out_scale: [f64; N_OUTPUTS],
    signal_scale: f64,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    layers: Vec<LayerManifest>,
    norm: NormManifest,
}

pub fn save_checkpoint<T: Scalar>(params: &ModelParams<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    params.validate()?;
    let layout = param_layout();
    let manifest = Manifest {
        version: 1,
        layers: layout
            .entries
            .iter()
            .map(|e| LayerManifest {
                name: e.name.to_string(),
                shape: e.shape.clone(),
            })
            .collect(),
        norm: NormManifest {
            out_mean: params.norm.out_mean.map(|v| v.as_f64()),
            out_scale: params.norm.out_scale.map(|v| v.as_f64()),
            signal_scale: params.norm.signal_scale.as_f64(),
        },
    };
    let manifest_bytes =
        serde_json::to_vec(&manifest).map_err(|e| Error::format(path, e.to_string()))?;

    let mut bytes = Vec::with_capacity(4 + 8 + manifest_bytes.len() + params.data.len() * 8);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(manifest_bytes.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&manifest_bytes);
    for v in &params.data {
        bytes.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<ModelParams<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::format(path, "missing STN1 magic"));
    }
    let mlen = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    if bytes.len() < 12 + mlen {
        return Err(Error::format(path, "truncated manifest"));
    }
    let manifest: Manifest = serde_json::from_slice(&bytes[12..12 + mlen])
        .map_err(|e| Error::format(path, e.to_string()))?;
    if manifest.version != 1 {
        return Err(Error::format(
            path,
            format!("unsupported checkpoint version {}", manifest.version),
        ));
    }
    let layout = param_layout();
    if manifest.layers.len() != layout.entries.len() {
        return Err(Error::format(path, "layer count does not match this architecture"));
    }
    for (m, e) in manifest.layers.iter().zip(&layout.entries) {
        if m.name != e.name || m.shape != e.shape {
            return Err(Error::format(
                path,
                format!("layer {} has shape {:?}, expected {} {:?}", m.name, m.shape, e.name, e.shape),
            ));
        }
    }
    let data_bytes = &bytes[12 + mlen..];
    if data_bytes.len() != layout.total * 8 {
        return Err(Error::format(
            path,
            format!(
                "expected {} parameter bytes, found {}",
                layout.total * 8,
                data_bytes.len()
            ),
        ));
    }
    let data: Vec<T> = data_bytes
        .chunks_exact(8)
        .map(|c| T::c(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    let params = ModelParams {
        data,
        norm: NormStats {
            out_mean: manifest.norm.out_mean.map(T::c),
            out_scale: manifest.norm.out_scale.map(T::c),
            signal_scale: T::c(manifest.norm.signal_scale),
        },
    };
    params.validate()?;
    Ok(params)
}
