//! The IMTX binary matrix format.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "IMTX"
//! 4       2     version (1)
//! 6       2     dtype (1 = f32, 2 = f64)
//! 8       8     rows
//! 16      8     cols
//! 24      ...   row-major payload
//! ```
//!
//! All integers and floats are little-endian.

use instability_core::{Precision, TensorMatrix};

pub const MAGIC: [u8; 4] = *b"IMTX";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImtxError {
    #[error("truncated header ({0} bytes)")]
    TruncatedHeader(usize),
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown dtype {0}")]
    UnknownDtype(u16),
    #[error("empty shape {rows}x{cols}")]
    EmptyShape { rows: u64, cols: u64 },
    #[error("payload is {found} bytes, header implies {expected}")]
    PayloadLength { expected: u128, found: usize },
    #[error(transparent)]
    Invalid(#[from] instability_core::Error),
}

fn dtype(precision: Precision) -> u16 {
    match precision {
        Precision::F32 => 1,
        Precision::F64 => 2,
    }
}

pub fn encode(matrix: &TensorMatrix) -> Vec<u8> {
    let width = match matrix.precision() {
        Precision::F32 => 4,
        Precision::F64 => 8,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + matrix.values().len() * width);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dtype(matrix.precision()).to_le_bytes());
    out.extend_from_slice(&(matrix.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(matrix.cols() as u64).to_le_bytes());
    for &v in matrix.values() {
        match matrix.precision() {
            // exact: f32 matrices only hold f32-representable values
            Precision::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            Precision::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<TensorMatrix, ImtxError> {
    if bytes.len() < HEADER_LEN {
        return Err(ImtxError::TruncatedHeader(bytes.len()));
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(ImtxError::BadMagic(magic));
    }
    let u16_at = |o: usize| u16::from_le_bytes(bytes[o..o + 2].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u16_at(4);
    if version != VERSION {
        return Err(ImtxError::UnsupportedVersion(version));
    }
    let (precision, width) = match u16_at(6) {
        1 => (Precision::F32, 4usize),
        2 => (Precision::F64, 8usize),
        other => return Err(ImtxError::UnknownDtype(other)),
    };
    let (rows, cols) = (u64_at(8), u64_at(16));
    if rows == 0 || cols == 0 {
        return Err(ImtxError::EmptyShape { rows, cols });
    }
    let payload = &bytes[HEADER_LEN..];
    let expected = rows as u128 * cols as u128 * width as u128;
    if payload.len() as u128 != expected {
        return Err(ImtxError::PayloadLength {
            expected,
            found: payload.len(),
        });
    }
    let values: Vec<f64> = match precision {
        Precision::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        Precision::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    Ok(TensorMatrix::new(rows as usize, cols as usize, values, precision)?)
}
