//! Latent batch files.
//!
//! `DLT1` layout, all integers little-endian:
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 4    | magic `b"DLT1"`                        |
//! | 4      | 2    | version (`u16`, currently 1)           |
//! | 6      | 12   | channels, height, width (`u32` each)   |
//! | 18     | 8    | element count over the batch (`u64`)   |
//! | 26     | 32   | sampler config fingerprint             |
//! | 58     | 4·n  | `f32` payload, tensor-major, row-major |
//!
//! The `.npy` sidecar holds the same values as a `(B, C, H, W)` `<f4` array
//! (format version 1.0) for pipelines that take initial latents directly.

use std::fs;
use std::path::Path;

use crate::io::FormatError;
use crate::tensor::{LatentShape, LatentTensor};

pub const MAGIC: [u8; 4] = *b"DLT1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 58;

const NPY_MAGIC: &[u8] = b"\x93NUMPY";
const NPY_ALIGN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentFileHeader {
    pub version: u16,
    pub shape: LatentShape,
    pub count: u64,
    pub fingerprint: [u8; 32],
}

impl LatentFileHeader {
    pub fn batch_len(&self) -> usize {
        (self.count / self.shape.len() as u64) as usize
    }
}

fn batch_shape(batch: &[LatentTensor]) -> Result<LatentShape, FormatError> {
    let shape = batch.first().ok_or(FormatError::EmptyBatch)?.shape();
    if let Some(t) = batch.iter().find(|t| t.shape() != shape) {
        return Err(FormatError::MixedShapes {
            first: shape,
            other: t.shape(),
        });
    }
    Ok(shape)
}

pub fn encode_latents(batch: &[LatentTensor], fingerprint: [u8; 32]) -> Result<Vec<u8>, FormatError> {
    let shape = batch_shape(batch)?;
    let count = (shape.len() * batch.len()) as u64;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * count as usize);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for dim in [shape.channels(), shape.height(), shape.width()] {
        let dim = u32::try_from(dim).map_err(|_| FormatError::DimensionTooLarge(dim))?;
        out.extend_from_slice(&dim.to_le_bytes());
    }
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&fingerprint);
    for t in batch {
        for v in t.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn decode_latents(bytes: &[u8]) -> Result<(LatentFileHeader, Vec<LatentTensor>), FormatError> {
    if bytes.len() >= 4 && bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic(bytes[..4].to_vec()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let dims = [u32_at(bytes, 6), u32_at(bytes, 10), u32_at(bytes, 14)].map(|d| d as usize);
    let count = u64::from_le_bytes(bytes[18..26].try_into().unwrap());
    let shape = LatentShape::new(dims[0], dims[1], dims[2]).map_err(|_| FormatError::ShapeCountMismatch {
        dims,
        count,
    })?;
    if count == 0 || count % shape.len() as u64 != 0 {
        return Err(FormatError::ShapeCountMismatch { dims, count });
    }
    let fingerprint: [u8; 32] = bytes[26..58].try_into().unwrap();
    let payload = &bytes[HEADER_LEN..];
    let expected = count
        .checked_mul(4)
        .and_then(|n| usize::try_from(n).ok())
        .ok_or(FormatError::ShapeCountMismatch { dims, count })?;
    if payload.len() < expected {
        return Err(FormatError::Truncated {
            expected: HEADER_LEN + expected,
            actual: bytes.len(),
        });
    }
    if payload.len() > expected {
        return Err(FormatError::TrailingBytes(payload.len() - expected));
    }
    let header = LatentFileHeader {
        version,
        shape,
        count,
        fingerprint,
    };
    let batch = payload_tensors(payload, shape)?;
    Ok((header, batch))
}

fn payload_tensors(payload: &[u8], shape: LatentShape) -> Result<Vec<LatentTensor>, FormatError> {
    payload
        .chunks_exact(4 * shape.len())
        .map(|chunk| {
            let values = chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            LatentTensor::new(shape, values).map_err(FormatError::from)
        })
        .collect()
}

pub fn write_latents(
    path: impl AsRef<Path>,
    batch: &[LatentTensor],
    fingerprint: [u8; 32],
) -> Result<(), FormatError> {
    let path = path.as_ref();
    let bytes = encode_latents(batch, fingerprint)?;
    fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}

pub fn read_latents(path: impl AsRef<Path>) -> Result<(LatentFileHeader, Vec<LatentTensor>), FormatError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| FormatError::io(path, e))?;
    decode_latents(&bytes)
}

fn npy_header(dims: &[usize]) -> Vec<u8> {
    let shape = dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ");
    let mut dict = format!("{{'descr': '<f4', 'fortran_order': False, 'shape': ({shape}), }}");
    let unpadded = NPY_MAGIC.len() + 4 + dict.len() + 1;
    dict.push_str(&" ".repeat((NPY_ALIGN - unpadded % NPY_ALIGN) % NPY_ALIGN));
    dict.push('\n');
    let mut out = Vec::with_capacity(10 + dict.len());
    out.extend_from_slice(NPY_MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out
}

/// The batch as a `(B, C, H, W)` little-endian `float32` `.npy` document.
pub fn encode_npy(batch: &[LatentTensor]) -> Result<Vec<u8>, FormatError> {
    let shape = batch_shape(batch)?;
    let mut out = npy_header(&[batch.len(), shape.channels(), shape.height(), shape.width()]);
    out.reserve(4 * shape.len() * batch.len());
    for t in batch {
        for v in t.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn npy_error(msg: impl Into<String>) -> FormatError {
    FormatError::Npy(msg.into())
}

/// Reads back a 4-D `<f4` C-order array written by [`encode_npy`] or numpy.
pub fn decode_npy(bytes: &[u8]) -> Result<Vec<LatentTensor>, FormatError> {
    if bytes.len() < 10 || &bytes[..6] != NPY_MAGIC {
        return Err(npy_error("missing \\x93NUMPY magic"));
    }
    if bytes[6] != 1 {
        return Err(npy_error(format!("unsupported format version {}.{}", bytes[6], bytes[7])));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let header = bytes
        .get(10..10 + header_len)
        .ok_or_else(|| npy_error("header runs past end of file"))?;
    let header = std::str::from_utf8(header).map_err(|_| npy_error("header is not ASCII"))?;
    let compact: String = header.chars().filter(|c| !c.is_whitespace()).collect();
    if !compact.contains("'descr':'<f4'") {
        return Err(npy_error("dtype must be '<f4'"));
    }
    if !compact.contains("'fortran_order':False") {
        return Err(npy_error("fortran_order arrays are not supported"));
    }
    let start = compact
        .find("'shape':(")
        .ok_or_else(|| npy_error("missing shape"))?
        + "'shape':(".len();
    let end = compact[start..].find(')').ok_or_else(|| npy_error("unterminated shape"))? + start;
    let dims = compact[start..end]
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| npy_error("non-integer shape entry"))?;
    let [b, c, h, w] = dims[..] else {
        return Err(npy_error(format!("expected a 4-D (B, C, H, W) array, got {} dims", dims.len())));
    };
    let shape = LatentShape::new(c, h, w).map_err(|_| npy_error("zero-sized latent dimension"))?;
    let payload = &bytes[10 + header_len..];
    let expected = b
        .checked_mul(4 * shape.len())
        .ok_or_else(|| npy_error("array size overflows"))?;
    if payload.len() != expected {
        return Err(FormatError::Truncated {
            expected: 10 + header_len + expected,
            actual: bytes.len(),
        });
    }
    payload_tensors(payload, shape)
}

pub fn write_npy(path: impl AsRef<Path>, batch: &[LatentTensor]) -> Result<(), FormatError> {
    let path = path.as_ref();
    fs::write(path, encode_npy(batch)?).map_err(|e| FormatError::io(path, e))
}

pub fn read_npy(path: impl AsRef<Path>) -> Result<Vec<LatentTensor>, FormatError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| FormatError::io(path, e))?;
    decode_npy(&bytes)
}
