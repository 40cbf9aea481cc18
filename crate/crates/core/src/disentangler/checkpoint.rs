//! Checkpoint files.
//!
//! Layout (little-endian): `b"SDCK"`, `u8` version (1), `u64` model
//! dimension, `u32` parameter count, then per parameter: `u32` name length,
//! UTF-8 name, `u64` rows, `u64` cols, `rows * cols` `f64` values.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numkernel::{Matrix, ParamSet};

use super::ModelParams;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SDCK";
const VERSION: u8 = 1;

pub fn encode_checkpoint(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(params.dim() as u64).to_le_bytes());
    out.extend_from_slice(&(params.params().len() as u32).to_le_bytes());
    for (name, m) in params.params().iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
        for x in m.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: &'a str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::parse(self.origin, format!("byte {}", self.pos), "truncated checkpoint"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8], origin: &str) -> Result<ModelParams> {
    let mut r = Reader { bytes, pos: 0, origin };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::parse(origin, "byte 0", "bad checkpoint magic"));
    }
    let version = r.take(1)?[0];
    if version != VERSION {
        return Err(Error::parse(origin, "byte 4", format!("unsupported checkpoint version {version}")));
    }
    let dim = r.u64()? as usize;
    let count = r.u32()? as usize;
    let mut set = ParamSet::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let at = r.pos;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::parse(origin, format!("byte {at}"), "parameter name is not UTF-8"))?
            .to_owned();
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let n = rows
            .checked_mul(cols)
            .filter(|n| n.checked_mul(8).is_some())
            .ok_or_else(|| Error::parse(origin, format!("byte {}", r.pos), "parameter size overflow"))?;
        let raw = r.take(8 * n)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        set.insert(name, Matrix::from_vec(rows, cols, data)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::parse(origin, format!("byte {}", r.pos), "trailing bytes after checkpoint"));
    }
    ModelParams::from_set(dim, set).map_err(|e| Error::parse(origin, "parameters", e.to_string()))
}

pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let p = ModelParams::random(5, 3, 0.3).unwrap();
        assert_eq!(decode_checkpoint(&encode_checkpoint(&p), "mem").unwrap(), p);
    }

    #[test]
    fn truncated_rejected() {
        let bytes = encode_checkpoint(&ModelParams::init(4, 1).unwrap());
        let err = decode_checkpoint(&bytes[..bytes.len() - 5], "mem").unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }

    #[test]
    fn version_and_shape_mismatch_rejected() {
        let mut bytes = encode_checkpoint(&ModelParams::init(4, 1).unwrap());
        bytes[4] = 9;
        assert!(decode_checkpoint(&bytes, "mem").unwrap_err().to_string().contains("version"));
        let mut bytes = encode_checkpoint(&ModelParams::init(4, 1).unwrap());
        // claim dimension 5 while matrices are 4x4
        bytes[5..13].copy_from_slice(&5u64.to_le_bytes());
        assert!(decode_checkpoint(&bytes, "mem").is_err());
    }
}
