//! Field files: CSV `i,j,value` or flat little-endian `f64`, each with a
//! sidecar `<file>.json` header `{nx, ny, h, origin, format}`. The header is
//! the only source of geometry.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Grid2D, ScalarField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldFormat {
    Csv,
    Bin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: [f64; 2],
    pub format: FieldFormat,
    /// Free-form metadata (component index, blowup scale, ...).
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub meta: serde_json::Map<String, serde_json::Value>,
}

impl FieldHeader {
    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.nx, self.ny, self.h, self.origin)
    }
}

pub fn header_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the field and its header; returns the paths written.
pub fn write_field(
    field: &ScalarField,
    path: &Path,
    format: FieldFormat,
    meta: serde_json::Map<String, serde_json::Value>,
) -> Result<[PathBuf; 2]> {
    let g = field.grid();
    let header = FieldHeader {
        nx: g.nx(),
        ny: g.ny(),
        h: g.h(),
        origin: g.origin(),
        format,
        meta,
    };
    let mut w = BufWriter::new(fs::File::create(path)?);
    match format {
        FieldFormat::Csv => {
            writeln!(w, "i,j,value")?;
            for j in 0..g.ny() {
                for i in 0..g.nx() {
                    writeln!(w, "{i},{j},{}", field.get(i, j))?;
                }
            }
        }
        FieldFormat::Bin => {
            for v in field.values() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    let hp = header_path(path);
    fs::write(&hp, serde_json::to_string_pretty(&header)? + "\n")?;
    Ok([path.to_path_buf(), hp])
}

pub fn read_header(path: &Path) -> Result<FieldHeader> {
    let text = fs::read_to_string(header_path(path))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_field(path: &Path) -> Result<(ScalarField, FieldHeader)> {
    let header = read_header(path)?;
    let grid = header.grid()?;
    let values = match header.format {
        FieldFormat::Bin => {
            let bytes = fs::read(path)?;
            if bytes.len() != 8 * grid.len() {
                return Err(Error::HeaderMismatch(format!(
                    "{} bytes for {} nodes",
                    bytes.len(),
                    grid.len()
                )));
            }
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect()
        }
        FieldFormat::Csv => {
            let text = fs::read_to_string(path)?;
            let mut lines = text.lines();
            if lines.next().map(str::trim) != Some("i,j,value") {
                return Err(Error::Parse("missing `i,j,value` header row".into()));
            }
            let mut values = vec![f64::NAN; grid.len()];
            let mut seen = vec![false; grid.len()];
            for (n, line) in lines.enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let mut parts = line.split(',');
                let mut next = |what: &str| {
                    parts
                        .next()
                        .map(str::trim)
                        .ok_or_else(|| Error::Parse(format!("line {}: missing {what}", n + 2)))
                };
                let i: usize = next("i")?
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", n + 2)))?;
                let j: usize = next("j")?
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", n + 2)))?;
                let v: f64 = next("value")?
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", n + 2)))?;
                if i >= grid.nx() || j >= grid.ny() {
                    return Err(Error::HeaderMismatch(format!(
                        "node ({i}, {j}) outside {} x {}",
                        grid.nx(),
                        grid.ny()
                    )));
                }
                let k = grid.idx(i, j);
                values[k] = v;
                seen[k] = true;
            }
            if let Some(k) = seen.iter().position(|s| !s) {
                let (i, j) = grid.ij(k);
                return Err(Error::HeaderMismatch(format!("node ({i}, {j}) missing")));
            }
            values
        }
    };
    Ok((ScalarField::new(grid, values)?, header))
}
