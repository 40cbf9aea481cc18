//! Small artifact formats used between commands.
//!
//! * manifest: one shape name per line, `#` comments.
//! * chirality vector: magic `SDV1`, u32 version 1, u64 length, then
//!   float32 little-endian values.
//! * labels: ASCII, one `0`/`1` per line, `#` comments.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const VECTOR_MAGIC: &[u8; 4] = b"SDV1";
const VECTOR_VERSION: u32 = 1;

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) && !name.starts_with('.')
}

pub fn parse_manifest(text: &str, origin: &str) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if !valid_name(line) {
            return Err(Error::parse(origin, format!("line {}", i + 1), format!("bad shape name `{line}`")));
        }
        if names.iter().any(|n| n == line) {
            return Err(Error::parse(origin, format!("line {}", i + 1), format!("duplicate shape `{line}`")));
        }
        names.push(line.to_owned());
    }
    if names.is_empty() {
        return Err(Error::parse(origin, "end of file", "manifest lists no shapes"));
    }
    Ok(names)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, &path.display().to_string())
}

pub fn save_manifest(names: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("# shapes\n");
    for n in names {
        out.push_str(n);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn encode_vector(values: &[f64]) -> Result<Vec<u8>> {
    if let Some(x) = values.iter().find(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("cannot store non-finite value {x}")));
    }
    let mut out = Vec::with_capacity(16 + 4 * values.len());
    out.extend_from_slice(VECTOR_MAGIC);
    out.extend_from_slice(&VECTOR_VERSION.to_le_bytes());
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_vector(bytes: &[u8], origin: &str) -> Result<Vec<f64>> {
    let bad = |at: usize, msg: &str| Error::parse(origin, format!("byte {at}"), msg.to_owned());
    if bytes.len() < 16 || &bytes[..4] != VECTOR_MAGIC {
        return Err(bad(0, "not a chirality vector file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VECTOR_VERSION {
        return Err(bad(4, &format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let expected = n.checked_mul(4).and_then(|b| b.checked_add(16));
    if expected != Some(bytes.len()) {
        return Err(bad(16, &format!("payload holds {} bytes, header says {n} values", bytes.len() - 16)));
    }
    let mut out = Vec::with_capacity(n);
    for (i, chunk) in bytes[16..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(bad(16 + 4 * i, "non-finite value"));
        }
        out.push(f64::from(v));
    }
    Ok(out)
}

pub fn save_vector(values: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_vector(values)?).map_err(|e| Error::io(path, e))
}

pub fn load_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_vector(&bytes, &path.display().to_string())
}

pub fn format_labels(labels: &[u8]) -> String {
    let mut out = format!("# {} binary labels\n", labels.len());
    for l in labels {
        let _ = writeln!(out, "{l}");
    }
    out
}

pub fn parse_labels(text: &str, origin: &str) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        match line {
            "" => {}
            "0" => out.push(0),
            "1" => out.push(1),
            other => {
                return Err(Error::parse(origin, format!("line {}", i + 1), format!("label `{other}` is not 0 or 1")));
            }
        }
    }
    Ok(out)
}

pub fn save_labels(labels: &[u8], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_labels(labels)).map_err(|e| Error::io(path, e))
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text, &path.display().to_string())
}

/// A per-vertex scalar field read from either a chirality vector or a
/// labels file, told apart by the vector magic.
pub fn load_scalar_field(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    if bytes.starts_with(VECTOR_MAGIC) {
        return decode_vector(&bytes, &origin);
    }
    let text = String::from_utf8(bytes).map_err(|_| Error::parse(&origin, "byte 0", "neither a vector nor a labels file"))?;
    Ok(parse_labels(&text, &origin)?.into_iter().map(f64::from).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_rules() {
        assert_eq!(parse_manifest("# c\na\n b_2 \n", "m").unwrap(), vec!["a", "b_2"]);
        assert!(parse_manifest("a\na\n", "m").is_err());
        assert!(parse_manifest("../x\n", "m").is_err());
        assert!(parse_manifest("# only\n", "m").is_err());
    }

    #[test]
    fn vector_round_trip_is_f32() {
        let v = vec![0.5, -1.0, 0.1, 0.0];
        let back = decode_vector(&encode_vector(&v).unwrap(), "v").unwrap();
        let expect: Vec<f64> = v.iter().map(|&x| f64::from(x as f32)).collect();
        assert_eq!(back, expect);
        let bytes = encode_vector(&v).unwrap();
        assert!(decode_vector(&bytes[..bytes.len() - 1], "v").is_err());
        assert!(decode_vector(b"SDF1\x01\0\0\0\0\0\0\0\0\0\0\0", "v").is_err());
        assert!(encode_vector(&[f64::NAN]).is_err());
    }

    #[test]
    fn labels_round_trip() {
        let l = vec![0u8, 1, 1, 0];
        assert_eq!(parse_labels(&format_labels(&l), "l").unwrap(), l);
        let err = parse_labels("0\n2\n", "l").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
