//! Field snapshots: a JSON header plus a sibling `.bin` file holding the raw
//! little-endian `f64` values in row-major order (`i1 * n + i2`).
//!
//! Checkpoints bundle one snapshot per stored field with the integrator
//! time and step count.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::scalar::Real;
use crate::state::FieldState;

pub const ENDIANNESS_TAG: &str = "little";
pub const DTYPE_TAG: &str = "f64";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub n: usize,
    pub half_length: f64,
    pub t: f64,
    pub component: usize,
    /// `"u"` or `"v"` (the time derivative).
    pub quantity: String,
    pub endianness: String,
    pub dtype: String,
    pub layout: String,
    /// File name of the raw array, relative to the header.
    pub data: String,
}

fn bin_path_for(header_path: &Path) -> PathBuf {
    header_path.with_extension("bin")
}

pub fn write_snapshot<T: Real>(
    path: &Path,
    field: &Field<T>,
    t: f64,
    component: usize,
    quantity: &str,
) -> Result<SnapshotHeader> {
    let grid = field.grid();
    let bin = bin_path_for(path);
    let header = SnapshotHeader {
        n: grid.n(),
        half_length: grid.half_length().as_f64(),
        t,
        component,
        quantity: quantity.to_string(),
        endianness: ENDIANNESS_TAG.to_string(),
        dtype: DTYPE_TAG.to_string(),
        layout: "row-major i1*n+i2".to_string(),
        data: bin
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let mut bytes = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        bytes.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let json = serde_json::to_string_pretty(&header)?;
    fs::write(path, json).map_err(|e| Error::io(path, e))?;
    Ok(header)
}

pub fn read_snapshot_header(path: &Path) -> Result<SnapshotHeader> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: SnapshotHeader = serde_json::from_str(&text)?;
    if header.endianness != ENDIANNESS_TAG || header.dtype != DTYPE_TAG {
        return Err(Error::InvalidArgument(format!(
            "unsupported snapshot encoding {}/{}",
            header.endianness, header.dtype
        )));
    }
    Ok(header)
}

/// Reads a snapshot onto `grid`, failing with `ShapeMismatch` when the stored
/// grid differs.
pub fn read_snapshot<T: Real>(path: &Path, grid: &Grid<T>) -> Result<(SnapshotHeader, Field<T>)> {
    let header = read_snapshot_header(path)?;
    if header.n != grid.n() || header.half_length != grid.half_length().as_f64() {
        return Err(Error::ShapeMismatch {
            expected: format!("n = {}, L = {}", grid.n(), grid.half_length()),
            found: format!("n = {}, L = {}", header.n, header.half_length),
        });
    }
    let bin = path
        .parent()
        .map(|p| p.join(&header.data))
        .unwrap_or_else(|| PathBuf::from(&header.data));
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    if bytes.len() != grid.len() * 8 {
        return Err(Error::ShapeMismatch {
            expected: format!("{} bytes", grid.len() * 8),
            found: format!("{} bytes", bytes.len()),
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
        .collect();
    Ok((header, Field::from_values(grid, values)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub t: f64,
    pub step: u64,
    pub n: usize,
    pub half_length: f64,
    /// Header file names, `[u, v]` per component.
    pub components: Vec<[String; 2]>,
}

pub fn write_checkpoint<T: Real>(dir: &Path, stem: &str, state: &FieldState<T>, step: u64) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let t = state.t().as_f64();
    let mut components = Vec::new();
    for (i, comp) in state.components().iter().enumerate() {
        let u_name = format!("{stem}_c{i}_u.json");
        let v_name = format!("{stem}_c{i}_v.json");
        write_snapshot(&dir.join(&u_name), &comp.u, t, i, "u")?;
        write_snapshot(&dir.join(&v_name), &comp.v, t, i, "v")?;
        components.push([u_name, v_name]);
    }
    let grid = state.grid();
    let manifest = CheckpointManifest {
        t,
        step,
        n: grid.n(),
        half_length: grid.half_length().as_f64(),
        components,
    };
    let path = dir.join(format!("{stem}.checkpoint.json"));
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_checkpoint<T: Real>(path: &Path, grid: &Grid<T>) -> Result<(FieldState<T>, u64)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut pairs = Vec::new();
    for [u_name, v_name] in &manifest.components {
        let (_, u) = read_snapshot(&dir.join(u_name), grid)?;
        let (_, v) = read_snapshot(&dir.join(v_name), grid)?;
        pairs.push((u, v));
    }
    let state = FieldState::new(T::lit(manifest.t), pairs)?;
    Ok((state, manifest.step))
}
