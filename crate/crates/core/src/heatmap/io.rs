//! Feature grid files and heatmap exports.
//!
//! A feature grid file starts with one line of JSON header
//! `{"height":m,"width":n,"dim":d,"layer":l,"encoding":"json"|"f64le"}`. With the `json`
//! encoding the next line is a JSON array of `m·n·d` numbers; with `f64le` the rest of the file
//! is raw little-endian `f64` values. Values are row-major over `(i, j, channel)`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::{FeatureGrid, Heatmap};
use crate::error::{input, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridEncoding {
    Json,
    F64le,
}

#[derive(Debug, Serialize, Deserialize)]
struct GridHeader {
    height: usize,
    width: usize,
    dim: usize,
    layer: usize,
    encoding: GridEncoding,
}

pub fn write_feature_grid(grid: &FeatureGrid, path: &Path, encoding: GridEncoding) -> Result<()> {
    let header = GridHeader {
        height: grid.height(),
        width: grid.width(),
        dim: grid.dim(),
        layer: grid.layer,
        encoding,
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    match encoding {
        GridEncoding::Json => {
            out.extend(serde_json::to_vec(grid.values())?);
            out.push(b'\n');
        }
        GridEncoding::F64le => {
            for v in grid.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_feature_grid(path: &Path) -> Result<FeatureGrid> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: GridHeader = serde_json::from_str(line.trim()).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: format!("bad feature grid header: {e}"),
    })?;
    let values: Vec<f64> = match header.encoding {
        GridEncoding::Json => {
            let mut body = String::new();
            reader.read_to_string(&mut body)?;
            serde_json::from_str(body.trim()).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: 2,
                message: format!("bad feature values: {e}"),
            })?
        }
        GridEncoding::F64le => {
            let mut body = Vec::new();
            reader.read_to_end(&mut body)?;
            if body.len() % 8 != 0 {
                return Err(input("feature grid body is not a whole number of f64 values"));
            }
            body.chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect()
        }
    };
    FeatureGrid::new(header.layer, header.height, header.width, header.dim, values)
}

/// One CSV line per heatmap row.
pub fn heatmap_csv(h: &Heatmap) -> String {
    let mut out = String::new();
    for i in 0..h.height() {
        let row: Vec<String> = (0..h.width()).map(|j| h.get(i, j).to_string()).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Binary 8-bit graymap, min-max scaled; a flat map is written black.
pub fn heatmap_pgm(h: &Heatmap) -> Vec<u8> {
    let lo = h.values().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = h.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = format!("P5\n{} {}\n255\n", h.width(), h.height()).into_bytes();
    out.extend(h.values().iter().map(|v| {
        if span > 0.0 {
            ((v - lo) / span * 255.0).round() as u8
        } else {
            0
        }
    }));
    out
}
