//! Grid and spectrum file formats.
//!
//! Binary grid layout, all little-endian:
//!
//! | offset | size | content                      |
//! |--------|------|------------------------------|
//! | 0      | 8    | magic `WSPECF2D`             |
//! | 8      | 2    | version (u16, currently 1)   |
//! | 10     | 4    | rows (u32)                   |
//! | 14     | 4    | cols (u32)                   |
//! | 18     | 8    | grid spacing in km (f64)     |
//! | 26     | 8·rows·cols | values, row-major (f64) |

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::lws::AvgSpectrum;
use crate::wavelet::Direction;

pub const GRID_MAGIC: &[u8; 8] = b"WSPECF2D";
pub const GRID_VERSION: u16 = 1;
pub const GRID_HEADER_LEN: usize = 26;

/// Shortest text that round-trips every f64: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn encode_grid(field: &Field2D) -> Vec<u8> {
    let (rows, cols) = field.dims();
    let mut out = Vec::with_capacity(GRID_HEADER_LEN + 8 * rows * cols);
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&GRID_VERSION.to_le_bytes());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    out.extend_from_slice(&field.grid_spacing.to_le_bytes());
    for v in field.values.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_grid(bytes: &[u8], path: &Path) -> Result<Field2D> {
    let fail = |offset: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        message,
    };
    if bytes.len() < GRID_HEADER_LEN {
        return Err(fail(
            bytes.len(),
            format!("header needs {GRID_HEADER_LEN} bytes, file has {}", bytes.len()),
        ));
    }
    if &bytes[..8] != GRID_MAGIC {
        return Err(fail(0, "bad magic, not a grid file".into()));
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != GRID_VERSION {
        return Err(fail(8, format!("unsupported version {version}")));
    }
    let rows = u32::from_le_bytes(bytes[10..14].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[14..18].try_into().expect("4 bytes")) as usize;
    let spacing = f64::from_le_bytes(bytes[18..26].try_into().expect("8 bytes"));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| fail(10, format!("dimensions {rows}x{cols} overflow")))?;
    let actual = bytes.len() - GRID_HEADER_LEN;
    if actual != expected {
        return Err(fail(
            GRID_HEADER_LEN + actual.min(expected),
            format!("payload of {rows}x{cols} grid needs {expected} bytes, found {actual}"),
        ));
    }
    let values: Vec<f64> = bytes[GRID_HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let values = Array2::from_shape_vec((rows, cols), values).expect("length checked");
    Field2D::with_spacing(values, spacing).map_err(|e| e.context(path.display().to_string()))
}

pub fn write_grid(field: &Field2D, path: &Path) -> Result<()> {
    fs::write(path, encode_grid(field)).map_err(|e| Error::io(path, e))
}

pub fn read_grid(path: &Path) -> Result<Field2D> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(decode_grid(&bytes, path)?.named(name))
}

/// Plain comma-separated numeric grid. A first row that does not parse as
/// numbers is taken as a header.
pub fn parse_csv_grid(text: &str, path: &Path) -> Result<Field2D> {
    let fail = |offset: u64, message: String| Error::Format {
        path: path.to_path_buf(),
        offset,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let offset = e.position().map_or(0, |p| p.byte());
            fail(offset, e.to_string())
        })?;
        let offset = record.position().map_or(0, |p| p.byte());
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if idx == 0 => continue,
            Err(e) => return Err(fail(offset, format!("row {}: {e}", idx + 1))),
        }
    }
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Err(fail(0, "no numeric rows".into()));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let values = Array2::from_shape_vec((n, m), flat).expect("csv enforces equal row lengths");
    Field2D::new(values).map_err(|e| e.context(path.display().to_string()))
}

pub fn read_csv_grid(path: &Path) -> Result<Field2D> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(parse_csv_grid(&text, path)?.named(name))
}

/// Reads a `.csv` grid as text and anything else as a binary grid.
pub fn read_field(path: &Path) -> Result<Field2D> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        read_csv_grid(path)
    } else {
        read_grid(path)
    }
}

pub fn write_csv_grid(values: &Array2<f64>, path: &Path) -> Result<()> {
    let mut out = String::new();
    for row in values.rows() {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn spectrum_csv(avg: &AvgSpectrum) -> String {
    let mut out = String::from("scale,direction,energy\n");
    for (s, d, e) in avg.entries() {
        out.push_str(&format!("{s},{d},{}\n", fmt_f64(e)));
    }
    out
}

pub fn write_spectrum_csv(avg: &AvgSpectrum, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(spectrum_csv(avg).as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads a `scale,direction,energy` table; scales must come in complete
/// h/v/d triples in ascending order.
pub fn read_spectrum_csv(path: &Path) -> Result<AvgSpectrum> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let fail = |offset: u64, message: String| Error::Format {
        path: path.to_path_buf(),
        offset,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut scales = Vec::new();
    let mut energies = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| fail(e.position().map_or(0, |p| p.byte()), e.to_string()))?;
        let offset = record.position().map_or(0, |p| p.byte());
        if record.len() != 3 {
            return Err(fail(offset, format!("expected 3 columns, got {}", record.len())));
        }
        let scale: u32 = record[0].parse().map_err(|e| fail(offset, format!("scale: {e}")))?;
        let dir: Direction = record[1].parse().map_err(|e: Error| fail(offset, e.to_string()))?;
        let energy: f64 = record[2].parse().map_err(|e| fail(offset, format!("energy: {e}")))?;
        if dir.index() != idx % 3 || (dir == Direction::H && scales.last().is_some_and(|&s| s >= scale)) {
            return Err(fail(offset, "entries must be ordered by scale, then h, v, d".into()));
        }
        if dir == Direction::H {
            scales.push(scale);
        } else if scales.last() != Some(&scale) {
            return Err(fail(offset, format!("scale {scale} does not match its triple")));
        }
        energies.push(energy);
    }
    if energies.is_empty() || energies.len() % 3 != 0 {
        return Err(fail(text.len() as u64, "incomplete spectrum table".into()));
    }
    Ok(AvgSpectrum {
        source: path.display().to_string(),
        scales,
        energies,
        standardized: false,
    })
}
