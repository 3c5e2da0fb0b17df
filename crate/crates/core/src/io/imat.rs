//! IMAT1: bit-exact matrix persistence.
//!
//! Layout: 5-byte magic "IMAT1", version byte 1, rows and cols as u32
//! little-endian, then rows*cols f64 little-endian values in row-major
//! order. A 0x0 matrix is a valid 14-byte file.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub const IMAT_MAGIC: &[u8; 5] = b"IMAT1";
pub const IMAT_VERSION: u8 = 1;
/// Magic + version + rows + cols.
pub const IMAT_HEADER_LEN: usize = 14;

fn corrupt(path: &Path, detail: String) -> Error {
    Error::CorruptFile {
        path: path.display().to_string(),
        detail,
    }
}

/// Write `bytes` to `path` through a temp file in the same directory, so a
/// crash never leaves a partial artifact under the final name.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidData(format!("{} has no file name", path.display())))?;
    let mut tmp = std::ffi::OsString::from(".");
    tmp.push(file_name);
    tmp.push(format!(".tmp.{}", std::process::id()));
    let tmp_path = match dir {
        Some(d) => d.join(&tmp),
        None => std::path::PathBuf::from(&tmp),
    };
    fs::write(&tmp_path, bytes)?;
    match fs::rename(&tmp_path, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_file(&tmp_path);
            Err(e.into())
        }
    }
}

/// Serialize a matrix to IMAT1 bytes. Entries must be finite.
pub fn matrix_to_bytes(matrix: &Array2<f64>) -> Result<Vec<u8>> {
    let (rows, cols) = matrix.dim();
    if rows > u32::MAX as usize || cols > u32::MAX as usize {
        return Err(Error::InvalidData(format!(
            "matrix {rows}x{cols} exceeds the u32 header range"
        )));
    }
    for (idx, &v) in matrix.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::InvalidData(format!(
                "non-finite entry {v} at flat index {idx}; refusing to persist"
            )));
        }
    }
    let mut bytes = Vec::with_capacity(IMAT_HEADER_LEN + rows * cols * 8);
    bytes.extend_from_slice(IMAT_MAGIC);
    bytes.push(IMAT_VERSION);
    bytes.extend_from_slice(&(rows as u32).to_le_bytes());
    bytes.extend_from_slice(&(cols as u32).to_le_bytes());
    for &v in matrix.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    Ok(bytes)
}

/// Parse IMAT1 bytes; `path` only labels errors.
pub fn matrix_from_bytes(path: &Path, bytes: &[u8]) -> Result<Array2<f64>> {
    if bytes.len() < IMAT_HEADER_LEN {
        return Err(corrupt(
            path,
            format!(
                "truncated header: expected at least {IMAT_HEADER_LEN} bytes, got {}",
                bytes.len()
            ),
        ));
    }
    if &bytes[..5] != IMAT_MAGIC {
        return Err(corrupt(
            path,
            format!("bad magic {:?}, expected {:?}", &bytes[..5], IMAT_MAGIC),
        ));
    }
    if bytes[5] != IMAT_VERSION {
        return Err(corrupt(
            path,
            format!("unsupported version {}, expected {IMAT_VERSION}", bytes[5]),
        ));
    }
    let rows = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[10..14].try_into().expect("4 bytes")) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| corrupt(path, format!("{rows}x{cols} payload overflows")))?;
    let actual = bytes.len() - IMAT_HEADER_LEN;
    if actual != expected {
        return Err(corrupt(
            path,
            format!("payload: expected {expected} bytes for {rows}x{cols}, got {actual}"),
        ));
    }
    let mut out = Array2::<f64>::zeros((rows, cols));
    for (i, v) in out.iter_mut().enumerate() {
        let o = IMAT_HEADER_LEN + i * 8;
        *v = f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    }
    Ok(out)
}

/// Persist a matrix atomically at `path`.
pub fn write_matrix(path: &Path, matrix: &Array2<f64>) -> Result<()> {
    atomic_write(path, &matrix_to_bytes(matrix)?)
}

/// Load a matrix, validating magic, version, and payload size.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(path.display().to_string())
        } else {
            e.into()
        }
    })?;
    matrix_from_bytes(path, &bytes)
}
