//! SDF1 descriptor files.
//!
//! Layout (little-endian): `b"SDF1"`, `u32` version (1), `u64` vertex count,
//! `u64` dimension, then `|V| * d` `f32` values of `F` row-major followed by
//! the same count for the flipped field.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numkernel::Matrix;

use super::DescriptorField;

pub const SDF_MAGIC: &[u8; 4] = b"SDF1";
pub const SDF_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

pub fn encode_sdf(values: &Matrix, flipped: &Matrix) -> Result<Vec<u8>> {
    if values.shape() != flipped.shape() {
        return Err(Error::shape(
            "encode_sdf",
            format!("{:?} vs {:?}", values.shape(), flipped.shape()),
        ));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * values.data().len());
    out.extend_from_slice(SDF_MAGIC);
    out.extend_from_slice(&SDF_VERSION.to_le_bytes());
    out.extend_from_slice(&(values.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(values.cols() as u64).to_le_bytes());
    for m in [values, flipped] {
        for &x in m.data() {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_sdf(bytes: &[u8], origin: &str) -> Result<DescriptorField> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::parse(origin, format!("byte {}", bytes.len()), "truncated header"));
    }
    if &bytes[..4] != SDF_MAGIC {
        return Err(Error::parse(origin, "byte 0", "bad magic, expected SDF1"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != SDF_VERSION {
        return Err(Error::parse(origin, "byte 4", format!("unsupported version {version}")));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let dim = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(Error::parse(origin, "byte 16", "descriptor dimension is 0"));
    }
    let count = rows
        .checked_mul(dim)
        .ok_or_else(|| Error::parse(origin, "byte 8", "size overflow"))?;
    let needed = HEADER_LEN + 8 * count;
    if bytes.len() < needed {
        return Err(Error::parse(
            origin,
            format!("byte {}", bytes.len()),
            format!("truncated payload: header promises {needed} bytes"),
        ));
    }
    let read = |start: usize| -> Result<Matrix> {
        let mut data = Vec::with_capacity(count);
        for k in 0..count {
            let off = start + 4 * k;
            let v = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::parse(origin, format!("byte {off}"), "non-finite entry"));
            }
            data.push(v as f64);
        }
        Matrix::from_vec(rows, dim, data)
    };
    let values = read(HEADER_LEN)?;
    let flipped = read(HEADER_LEN + 4 * count)?;
    DescriptorField::new(values, flipped)
}

pub fn load_descriptors(path: impl AsRef<Path>) -> Result<DescriptorField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_sdf(&bytes, &path.display().to_string())
}

pub fn save_descriptors(field: &DescriptorField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_sdf(field.values(), field.flipped())?).map_err(|e| Error::io(path, e))
}
