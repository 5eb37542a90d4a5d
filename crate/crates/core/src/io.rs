//! On-disk representation of volumes, masks, maps and time series.
//!
//! Each array lives in a raw little-endian data file next to a JSON header
//! sidecar: volumes and maps store IEEE-754 32-bit floats, masks store
//! 8-bit flags. `path` arguments always name the JSON header; the data file
//! is the same name with extension `raw` (maps use `<name>_cbv.raw` and
//! friends). In-memory arithmetic stays in the crate's scalar type; only
//! the on-disk encoding is 32-bit.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{SeriesKind, TimeSeries};
use crate::volume::{Mask3D, ParameterMaps, Volume4D, VolumeHeader};

#[derive(Serialize, Deserialize)]
struct VolumeHeaderJson {
    dims: [usize; 4],
    dt_s: f64,
    te_s: f64,
    voxel_mm: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct MaskHeaderJson {
    dims: [usize; 3],
}

#[derive(Serialize, Deserialize)]
struct MapsHeaderJson {
    dims: [usize; 3],
    voxel_mm: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct SeriesJson {
    dt_s: f64,
    kind: String,
    values: Vec<f64>,
}

fn raw_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("raw")
}

fn sibling_raw(header_path: &Path, suffix: &str) -> PathBuf {
    let stem = header_path.file_stem().unwrap_or_default().to_string_lossy();
    header_path.with_file_name(format!("{stem}_{suffix}.raw"))
}

fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.write_all(b"\n").map_err(|e| Error::io(path, e))
}

fn read_f32_raw(path: &Path, expect: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expect * 4 {
        return Err(Error::format(
            path,
            format!("expected {} bytes ({} f32 values), found {}", expect * 4, expect, bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn write_f32_raw<T: Scalar>(path: &Path, values: &[T]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn lift<T: Scalar>(raw: Vec<f32>) -> Vec<T> {
    raw.into_iter().map(|v| T::c(v as f64)).collect()
}

pub fn read_volume<T: Scalar>(path: impl AsRef<Path>) -> Result<Volume4D<T>> {
    let path = path.as_ref();
    let h: VolumeHeaderJson = read_json(path)?;
    let header = VolumeHeader {
        dims: h.dims,
        dt_s: h.dt_s,
        te_s: h.te_s,
        voxel_mm: h.voxel_mm,
    };
    header.validate()?;
    let raw = read_f32_raw(&raw_path(path), header.n_samples())?;
    Volume4D::new(header, lift(raw))
}

pub fn write_volume<T: Scalar>(v: &Volume4D<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    v.validate()?;
    write_json(
        path,
        &VolumeHeaderJson {
            dims: v.header.dims,
            dt_s: v.header.dt_s,
            te_s: v.header.te_s,
            voxel_mm: v.header.voxel_mm,
        },
    )?;
    write_f32_raw(&raw_path(path), &v.data)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask3D> {
    let path = path.as_ref();
    let h: MaskHeaderJson = read_json(path)?;
    let n = h.dims[0] * h.dims[1] * h.dims[2];
    let data_path = raw_path(path);
    let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    if bytes.len() != n {
        return Err(Error::format(
            &data_path,
            format!("expected {} mask bytes, found {}", n, bytes.len()),
        ));
    }
    Mask3D::new(h.dims, bytes)
}

pub fn write_mask(m: &Mask3D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    m.validate()?;
    write_json(path, &MaskHeaderJson { dims: m.dims })?;
    fs::write(raw_path(path), &m.data).map_err(|e| Error::io(raw_path(path), e))
}

pub fn read_maps<T: Scalar>(path: impl AsRef<Path>) -> Result<ParameterMaps<T>> {
    let path = path.as_ref();
    let h: MapsHeaderJson = read_json(path)?;
    let n = h.dims[0] * h.dims[1] * h.dims[2];
    let maps = ParameterMaps {
        dims: h.dims,
        voxel_mm: h.voxel_mm,
        cbv: lift(read_f32_raw(&sibling_raw(path, "cbv"), n)?),
        cbf: lift(read_f32_raw(&sibling_raw(path, "cbf"), n)?),
        mtt: lift(read_f32_raw(&sibling_raw(path, "mtt"), n)?),
        tmax: lift(read_f32_raw(&sibling_raw(path, "tmax"), n)?),
    };
    maps.validate()?;
    Ok(maps)
}

pub fn write_maps<T: Scalar>(maps: &ParameterMaps<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    maps.validate()?;
    write_json(
        path,
        &MapsHeaderJson {
            dims: maps.dims,
            voxel_mm: maps.voxel_mm,
        },
    )?;
    for (name, data) in maps.named() {
        write_f32_raw(&sibling_raw(path, name), data)?;
    }
    Ok(())
}

/// Time series live in a single JSON file: `{dt_s, kind, values}`.
pub fn read_series<T: Scalar>(path: impl AsRef<Path>) -> Result<TimeSeries<T>> {
    let path = path.as_ref();
    let s: SeriesJson = read_json(path)?;
    let kind = SeriesKind::parse(&s.kind)
        .ok_or_else(|| Error::format(path, format!("unknown series kind {:?}", s.kind)))?;
    TimeSeries::new(s.values.into_iter().map(T::c).collect(), T::c(s.dt_s), kind)
}

pub fn write_series<T: Scalar>(s: &TimeSeries<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    s.validate()?;
    write_json(
        path,
        &SeriesJson {
            dt_s: s.dt_s.as_f64(),
            kind: s.kind.as_str().to_string(),
            values: s.values.iter().map(|v| v.as_f64()).collect(),
        },
    )
}
