//! Field serialization: a JSON header next to a raw little-endian `f64` file.
//!
//! `<stem>.json` holds a [`FieldHeader`]; `<stem>.bin` holds the `N^{2n}`
//! values in grid order (row-major over `x1, y1, ..., xn, yn`), 8 bytes each,
//! little-endian IEEE-754.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ScalarField, TorusGeometry};
use crate::error::{Error, Result};
use crate::hermitian_cone::HermitianMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub n: usize,
    #[serde(rename = "N")]
    pub grid: usize,
    /// Constant part of the form the potential belongs to, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<HermitianMatrix>,
    pub byte_order: String,
    pub dtype: String,
    /// Binary file name, relative to the header.
    pub data: String,
}

fn stem_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("bin"))
}

/// Writes `<stem>.json` and `<stem>.bin`; returns the header path.
pub fn write_field(stem: &Path, field: &ScalarField, base: Option<&HermitianMatrix>) -> Result<PathBuf> {
    let (json, bin) = stem_paths(stem);
    let geom = field.geometry();
    let header = FieldHeader {
        n: geom.n(),
        grid: geom.grid(),
        base: base.cloned(),
        byte_order: "little-endian".into(),
        dtype: "f64".into(),
        data: bin
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| Error::Io(format!("bad field path {}", stem.display())))?,
    };
    let mut bytes = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&bin, bytes)?;
    fs::write(&json, serde_json::to_string_pretty(&header)?)?;
    Ok(json)
}

/// Reads a field written by [`write_field`] from its header path.
pub fn read_field(header_path: &Path) -> Result<(ScalarField, FieldHeader)> {
    let header: FieldHeader = serde_json::from_slice(&fs::read(header_path)?)?;
    if header.byte_order != "little-endian" || header.dtype != "f64" {
        return Err(Error::Data(format!(
            "unsupported field encoding {} / {}",
            header.byte_order, header.dtype
        )));
    }
    let geom = TorusGeometry::new(header.n, header.grid)?;
    let bin = header_path.with_file_name(&header.data);
    let bytes = fs::read(&bin)?;
    if bytes.len() != geom.len() * 8 {
        return Err(Error::Data(format!(
            "{} holds {} bytes, expected {}",
            bin.display(),
            bytes.len(),
            geom.len() * 8
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((ScalarField::new(geom, values)?, header))
}

/// CSV with one row per grid point: the real coordinates, then the value.
pub fn write_field_csv(path: &Path, field: &ScalarField) -> Result<()> {
    let geom = field.geometry();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let mut head: Vec<String> = (1..=geom.n()).flat_map(|j| [format!("x{j}"), format!("y{j}")]).collect();
    head.push("value".into());
    w.write_record(&head).map_err(|e| Error::Io(e.to_string()))?;
    for (i, v) in field.values().iter().enumerate() {
        let mut row: Vec<String> = geom.coords(i).iter().map(|c| format!("{c}")).collect();
        row.push(format!("{v:e}"));
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
