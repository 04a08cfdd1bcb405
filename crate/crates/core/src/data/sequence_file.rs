//! Binary sequence files.
//!
//! Layout, all little-endian:
//!
//! | offset | size      | field                      |
//! |--------|-----------|----------------------------|
//! | 0      | 4         | magic `UMSA`               |
//! | 4      | 2         | format version (`u16`, 1)  |
//! | 6      | 4         | rows `L` (`u32`)           |
//! | 10     | 4         | cols `D` (`u32`)           |
//! | 14     | 4 * L * D | row-major `f32` payload    |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numcore::Tensor2D;

pub const MAGIC: &[u8; 4] = b"UMSA";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 14;

pub fn encode_sequence(x: &Tensor2D) -> Result<Vec<u8>> {
    let (rows, cols) = x.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::Shape(format!(
            "cannot store an empty {rows}x{cols} sequence"
        )));
    }
    let l = u32::try_from(rows).map_err(|_| Error::Shape(format!("{rows} rows exceed u32")))?;
    let d = u32::try_from(cols).map_err(|_| Error::Shape(format!("{cols} cols exceed u32")))?;
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * x.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&l.to_le_bytes());
    buf.extend_from_slice(&d.to_le_bytes());
    for &v in x.data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(buf)
}

/// Parses a sequence file image; `origin` only labels errors.
pub fn decode_sequence(bytes: &[u8], origin: &Path) -> Result<Tensor2D> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            origin,
            format!("{} bytes is shorter than the header", bytes.len()),
        ));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format(origin, "bad magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::format(
            origin,
            format!("unsupported version {version}"),
        ));
    }
    let rows = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes"));
    let cols = u32::from_le_bytes(bytes[10..14].try_into().expect("4 bytes"));
    if rows == 0 || cols == 0 {
        return Err(Error::format(origin, format!("empty shape {rows}x{cols}")));
    }
    let need = (rows as usize)
        .checked_mul(cols as usize)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(origin, format!("shape {rows}x{cols} overflows")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != need {
        return Err(Error::format(
            origin,
            format!(
                "payload has {} bytes, header {rows}x{cols} needs {need}",
                payload.len()
            ),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    Tensor2D::from_vec(rows as usize, cols as usize, data)
}

pub fn write_sequence(x: &Tensor2D, path: &Path) -> Result<()> {
    let bytes = encode_sequence(x)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_sequence(path: &Path) -> Result<Tensor2D> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_sequence(&bytes, path)
}
