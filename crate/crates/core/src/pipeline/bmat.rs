//! BMAT matrix files.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "BMAT"
//! 4       4     version (u32 LE) = 1
//! 8       8     rows (u64 LE)
//! 16      8     cols (u64 LE)
//! 24      4·r·c values, f32 LE, row-major
//! ```
//!
//! Files ending in `.csv` are read as comma-separated rows instead.

use std::path::Path;

use nalgebra::DMatrix;

use super::PipelineError;

pub const BMAT_MAGIC: &[u8; 4] = b"BMAT";
pub const BMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

pub fn encode_bmat(m: &DMatrix<f64>) -> Vec<u8> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * r * c);
    out.extend_from_slice(BMAT_MAGIC);
    out.extend_from_slice(&BMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(r as u64).to_le_bytes());
    out.extend_from_slice(&(c as u64).to_le_bytes());
    for i in 0..r {
        for j in 0..c {
            out.extend_from_slice(&(m[(i, j)] as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_bmat(bytes: &[u8]) -> Result<DMatrix<f64>, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("{} bytes is shorter than the header", bytes.len()));
    }
    if &bytes[..4] != BMAT_MAGIC {
        return Err("bad magic".into());
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != BMAT_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    let want = rows.checked_mul(cols).and_then(|n| n.checked_mul(4)).ok_or("dimensions overflow")?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != want {
        return Err(format!("{rows}×{cols} needs {want} data bytes, found {}", body.len()));
    }
    let vals: Vec<f64> = body.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64).collect();
    Ok(DMatrix::from_row_slice(rows, cols, &vals))
}

/// Numeric CSV, one row per line; a non-numeric first line is a header.
pub fn parse_csv_matrix(text: &str) -> Result<DMatrix<f64>, String> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        match parsed {
            Ok(r) => {
                if let Some(first) = rows.first() {
                    if first.len() != r.len() {
                        return Err(format!("line {}: {} columns, expected {}", i + 1, r.len(), first.len()));
                    }
                }
                rows.push(r);
            }
            Err(_) if rows.is_empty() && i == 0 => continue,
            Err(e) => return Err(format!("line {}: {e}", i + 1)),
        }
    }
    let cols = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), cols, &flat))
}

/// Read a BMAT (or `.csv`) file.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, PipelineError> {
    let bad = |msg: String| PipelineError::Bmat { path: path.to_path_buf(), msg };
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        return parse_csv_matrix(&text).map_err(bad);
    }
    let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    decode_bmat(&bytes).map_err(bad)
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<(), PipelineError> {
    std::fs::write(path, encode_bmat(m)).map_err(|e| PipelineError::io(path, e))
}
