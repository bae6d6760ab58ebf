//! EMAP binary and plain-text grid encodings.
//!
//! EMAP v1, all little-endian:
//!
//! ```text
//! "EMAP" | u16 version=1 | u16 side | f32 cell_size | f64 origin_x | f64 origin_y
//! side*side f32 elevations, row-major, row 0 at minimum y
//! ```
//!
//! Text grids hold one row per line, space-separated, with the first line
//! being the northernmost row (maximum y), as in common ASCII raster dumps.

use std::io::{BufRead, Read, Write};

use super::map::{ElevationMap, DEFAULT_SIDE};
use crate::error::{Error, Result};

pub const EMAP_MAGIC: &[u8; 4] = b"EMAP";
pub const EMAP_VERSION: u16 = 1;
const EMAP_HEADER_LEN: usize = 4 + 2 + 2 + 4 + 8 + 8;

pub fn write_emap<W: Write>(map: &ElevationMap, mut out: W) -> Result<()> {
    let side = u16::try_from(map.side_cells())
        .map_err(|_| Error::InvalidConfig(format!("side {} does not fit EMAP", map.side_cells())))?;
    let mut buf = Vec::with_capacity(EMAP_HEADER_LEN + map.cells().len() * 4);
    buf.extend_from_slice(EMAP_MAGIC);
    buf.extend_from_slice(&EMAP_VERSION.to_le_bytes());
    buf.extend_from_slice(&side.to_le_bytes());
    buf.extend_from_slice(&(map.cell_size() as f32).to_le_bytes());
    buf.extend_from_slice(&map.origin().0.to_le_bytes());
    buf.extend_from_slice(&map.origin().1.to_le_bytes());
    for z in map.cells() {
        buf.extend_from_slice(&z.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_emap<R: Read>(mut input: R) -> Result<ElevationMap> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < EMAP_HEADER_LEN {
        return Err(Error::Parse(format!("EMAP header truncated ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != EMAP_MAGIC {
        return Err(Error::Parse("missing EMAP magic".into()));
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let f64_at = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let version = u16_at(4);
    if version != EMAP_VERSION {
        return Err(Error::Parse(format!("unsupported EMAP version {version}")));
    }
    let side = u16_at(6) as usize;
    let cell_size = f32::from_le_bytes(bytes[8..12].try_into().unwrap()) as f64;
    let origin = (f64_at(12), f64_at(20));
    let body = &bytes[EMAP_HEADER_LEN..];
    if body.len() != side * side * 4 {
        return Err(Error::Parse(format!(
            "EMAP body holds {} bytes, expected {} for side {side}",
            body.len(),
            side * side * 4
        )));
    }
    let cells = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ElevationMap::new(side, cell_size, origin, cells).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_text_grid<W: Write>(map: &ElevationMap, mut out: W) -> Result<()> {
    let n = map.side_cells();
    let mut text = String::new();
    for row in (0..n).rev() {
        for col in 0..n {
            if col > 0 {
                text.push(' ');
            }
            text.push_str(&map.get(row, col).to_string());
        }
        text.push('\n');
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

/// Reads a square text grid covering `extent` meters, centered on the origin.
pub fn read_text_grid<R: BufRead>(input: R, extent: f64) -> Result<ElevationMap> {
    let mut rows: Vec<Vec<f32>> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f32>()
                    .map_err(|_| Error::Parse(format!("line {}: bad value {tok:?}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n < 2 {
        return Err(Error::Parse(format!("text grid needs at least 2 rows, got {n}")));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::NonSquareGrid { rows: n, cols: bad.len() });
    }
    let cells = rows.into_iter().rev().flatten().collect();
    ElevationMap::new(n, extent / (n as f64 - 1.0), (0.0, 0.0), cells)
}

/// Extent assumed for text grids that carry no geometry of their own.
pub fn default_text_extent() -> f64 {
    (DEFAULT_SIDE as f64 - 1.0) * super::map::DEFAULT_CELL_SIZE
}
