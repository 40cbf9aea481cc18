//! OBJ and PLY readers/writers.
//!
//! OBJ: only `v` and `f` records are interpreted; polygon faces are fan
//! triangulated and `v/vt/vn` index forms accepted (texture and normal
//! indices ignored). PLY: ascii and binary little-endian, any scalar type
//! for positions, optional `red`/`green`/`blue` uchar colors.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Point, TriMesh};

/// Dispatches on file extension (`.obj` or `.ply`).
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("obj") => load_obj(path),
        Some("ply") => Ok(load_ply(path)?.mesh),
        _ => Err(Error::invalid(format!(
            "unsupported mesh format: {}",
            path.display()
        ))),
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase())
}

pub fn load_obj(path: &Path) -> Result<TriMesh> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, &path.display().to_string())
}

pub(crate) fn parse_obj(text: &str, origin: &str) -> Result<TriMesh> {
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let loc = || format!("line {}", ln + 1);
        let line = line.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let mut p = [0.0; 3];
                for c in p.iter_mut() {
                    *c = tok
                        .next()
                        .and_then(|t| t.parse::<f64>().ok())
                        .ok_or_else(|| Error::parse(origin, loc(), "vertex needs 3 numeric coordinates"))?;
                }
                positions.push(p);
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in tok {
                    let head = t.split('/').next().unwrap_or("");
                    let raw: i64 = head
                        .parse()
                        .map_err(|_| Error::parse(origin, loc(), format!("bad face index `{t}`")))?;
                    let resolved = if raw > 0 {
                        raw - 1
                    } else if raw < 0 {
                        positions.len() as i64 + raw
                    } else {
                        -1
                    };
                    if resolved < 0 || resolved as usize >= positions.len() {
                        return Err(Error::parse(origin, loc(), format!("face index {raw} out of range")));
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(Error::parse(origin, loc(), "face needs at least 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriMesh::new(positions, faces).map_err(|e| Error::parse(origin, "end of file", e.to_string()))
}

pub fn save_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for p in mesh.positions() {
        let _ = writeln!(out, "v {} {} {}", p[0], p[1], p[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlyData {
    pub mesh: TriMesh,
    pub colors: Option<Vec<[u8; 3]>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Cursor over PLY body values, either ascii tokens or little-endian bytes.
enum Body<'a> {
    Ascii {
        lines: std::iter::Enumerate<std::str::Lines<'a>>,
        current: Vec<&'a str>,
        pos: usize,
        line_no: usize,
        header_lines: usize,
    },
    Binary {
        bytes: &'a [u8],
        offset: usize,
    },
}

impl Body<'_> {
    fn next(&mut self, ty: Scalar, origin: &str) -> Result<f64> {
        match self {
            Body::Ascii {
                lines,
                current,
                pos,
                line_no,
                header_lines,
            } => {
                while *pos >= current.len() {
                    let (i, l) = lines
                        .next()
                        .ok_or_else(|| Error::parse(origin, "end of file", "unexpected end of ascii body"))?;
                    *line_no = i + 1 + *header_lines;
                    *current = l.split_whitespace().collect();
                    *pos = 0;
                }
                let t = current[*pos];
                *pos += 1;
                t.parse::<f64>()
                    .map_err(|_| Error::parse(origin, format!("line {line_no}"), format!("bad number `{t}`")))
            }
            Body::Binary { bytes, offset } => {
                let end = *offset + ty.size();
                if end > bytes.len() {
                    return Err(Error::parse(
                        origin,
                        format!("byte {offset}"),
                        "truncated binary body",
                    ));
                }
                let v = ty.read_le(&bytes[*offset..end]);
                *offset = end;
                Ok(v)
            }
        }
    }
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<PlyData> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&bytes, &path.display().to_string())
}

pub(crate) fn parse_ply(bytes: &[u8], origin: &str) -> Result<PlyData> {
    // header is ascii, terminated by "end_header\n"
    let marker = b"end_header";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| Error::parse(origin, "header", "missing end_header"))?;
    let mut body_start = end + marker.len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) == Some(&b'\n') {
        body_start += 1;
    }
    let header = std::str::from_utf8(&bytes[..end])
        .map_err(|_| Error::parse(origin, "header", "header is not valid text"))?;

    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::parse(origin, "line 1", "missing `ply` magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for (i, line) in lines.enumerate() {
        let loc = || format!("line {}", i + 2);
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.first().copied() {
            Some("format") => {
                format = Some(match tok.get(1).copied() {
                    Some("ascii") => PlyFormat::Ascii,
                    Some("binary_little_endian") => PlyFormat::BinaryLittleEndian,
                    other => {
                        return Err(Error::parse(origin, loc(), format!("unsupported format {other:?}")))
                    }
                })
            }
            Some("element") => {
                let (name, count) = match (tok.get(1), tok.get(2).and_then(|c| c.parse().ok())) {
                    (Some(n), Some(c)) => (n.to_string(), c),
                    _ => return Err(Error::parse(origin, loc(), "malformed element line")),
                };
                elements.push(Element {
                    name,
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(origin, loc(), "property before element"))?;
                let bad = || Error::parse(origin, loc(), "malformed property line");
                if tok.get(1) == Some(&"list") {
                    let count = tok.get(2).and_then(|t| Scalar::parse(t)).ok_or_else(bad)?;
                    let item = tok.get(3).and_then(|t| Scalar::parse(t)).ok_or_else(bad)?;
                    let name = tok.get(4).ok_or_else(bad)?.to_string();
                    el.props.push(Property::List { name, count, item });
                } else {
                    let ty = tok.get(1).and_then(|t| Scalar::parse(t)).ok_or_else(bad)?;
                    let name = tok.get(2).ok_or_else(bad)?.to_string();
                    el.props.push(Property::Scalar { name, ty });
                }
            }
            _ => {}
        }
    }
    let format = format.ok_or_else(|| Error::parse(origin, "header", "missing format line"))?;

    let mut body = match format {
        PlyFormat::Ascii => {
            let text = std::str::from_utf8(&bytes[body_start..])
                .map_err(|_| Error::parse(origin, "body", "ascii body is not valid text"))?;
            Body::Ascii {
                lines: text.lines().enumerate(),
                current: Vec::new(),
                pos: 0,
                line_no: 0,
                header_lines: header.lines().count() + 1,
            }
        }
        PlyFormat::BinaryLittleEndian => Body::Binary {
            bytes,
            offset: body_start,
        },
    };

    let mut positions: Vec<Point> = Vec::new();
    let mut colors: Vec<[u8; 3]> = Vec::new();
    let mut has_colors = false;
    let mut faces = Vec::new();
    for el in &elements {
        let slot = |name: &str| {
            el.props
                .iter()
                .position(|p| matches!(p, Property::Scalar { name: n, .. } if n == name))
        };
        let (xi, yi, zi) = (slot("x"), slot("y"), slot("z"));
        let (ri, gi, bi) = (slot("red"), slot("green"), slot("blue"));
        if el.name == "vertex" {
            if xi.is_none() || yi.is_none() || zi.is_none() {
                return Err(Error::parse(origin, "header", "vertex element lacks x/y/z"));
            }
            has_colors = ri.is_some() && gi.is_some() && bi.is_some();
        }
        for _ in 0..el.count {
            let mut scalars = vec![0.0; el.props.len()];
            let mut list: Option<Vec<f64>> = None;
            for (k, prop) in el.props.iter().enumerate() {
                match prop {
                    Property::Scalar { ty, .. } => scalars[k] = body.next(*ty, origin)?,
                    Property::List { name, count, item } => {
                        let n = body.next(*count, origin)?;
                        if n < 0.0 {
                            return Err(Error::parse(origin, "body", "negative list length"));
                        }
                        let vals = (0..n as usize)
                            .map(|_| body.next(*item, origin))
                            .collect::<Result<Vec<_>>>()?;
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            list = Some(vals);
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => {
                    positions.push([scalars[xi.unwrap()], scalars[yi.unwrap()], scalars[zi.unwrap()]]);
                    if has_colors {
                        colors.push([ri, gi, bi].map(|i| scalars[i.unwrap()].clamp(0.0, 255.0) as u8));
                    }
                }
                "face" => {
                    let idx = list.ok_or_else(|| Error::parse(origin, "body", "face without vertex indices"))?;
                    if idx.len() < 3 {
                        return Err(Error::parse(origin, "body", "face needs at least 3 vertices"));
                    }
                    for k in 1..idx.len() - 1 {
                        faces.push([idx[0], idx[k], idx[k + 1]].map(|v| v as usize));
                    }
                }
                _ => {}
            }
        }
    }
    if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= positions.len())) {
        return Err(Error::parse(
            origin,
            "body",
            format!("face {f:?} out of range for {} vertices", positions.len()),
        ));
    }
    let mesh = TriMesh::new(positions, faces).map_err(|e| Error::parse(origin, "body", e.to_string()))?;
    Ok(PlyData {
        mesh,
        colors: has_colors.then_some(colors),
    })
}

/// Binary output stores positions as `double` so a save/load round trip is
/// bit-exact; ascii output uses shortest round-trip decimal formatting.
pub fn save_ply(
    mesh: &TriMesh,
    path: impl AsRef<Path>,
    colors: Option<&[[u8; 3]]>,
    format: PlyFormat,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_ply(mesh, colors, format)?).map_err(|e| Error::io(path, e))
}

pub(crate) fn encode_ply(mesh: &TriMesh, colors: Option<&[[u8; 3]]>, format: PlyFormat) -> Result<Vec<u8>> {
    if let Some(c) = colors {
        if c.len() != mesh.vertex_count() {
            return Err(Error::shape(
                "save_ply",
                format!("{} colors for {} vertices", c.len(), mesh.vertex_count()),
            ));
        }
    }
    let mut header = String::from("ply\n");
    header += match format {
        PlyFormat::Ascii => "format ascii 1.0\n",
        PlyFormat::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    };
    let _ = writeln!(header, "element vertex {}", mesh.vertex_count());
    header += "property double x\nproperty double y\nproperty double z\n";
    if colors.is_some() {
        header += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    }
    let _ = writeln!(header, "element face {}", mesh.face_count());
    header += "property list uchar int vertex_indices\nend_header\n";

    let mut out = header.into_bytes();
    match format {
        PlyFormat::Ascii => {
            let mut body = String::new();
            for (i, p) in mesh.positions().iter().enumerate() {
                let _ = write!(body, "{:?} {:?} {:?}", p[0], p[1], p[2]);
                if let Some(c) = colors {
                    let _ = write!(body, " {} {} {}", c[i][0], c[i][1], c[i][2]);
                }
                body.push('\n');
            }
            for f in mesh.faces() {
                let _ = writeln!(body, "3 {} {} {}", f[0], f[1], f[2]);
            }
            out.extend_from_slice(body.as_bytes());
        }
        PlyFormat::BinaryLittleEndian => {
            for (i, p) in mesh.positions().iter().enumerate() {
                for c in p {
                    out.extend_from_slice(&c.to_le_bytes());
                }
                if let Some(c) = colors {
                    out.extend_from_slice(&c[i]);
                }
            }
            for f in mesh.faces() {
                out.push(3);
                for &i in f {
                    out.extend_from_slice(&(i as i32).to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives::icosphere;

    #[test]
    fn obj_square_and_quad_fan() {
        let sq = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3\nf 1 3 4\n", "mem").unwrap();
        assert_eq!((sq.vertex_count(), sq.face_count()), (4, 2));
        let quad = parse_obj("# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n", "mem").unwrap();
        assert_eq!(quad.faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_errors_report_line() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nf 1 2 9\n", "mem").unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
        let err = parse_obj("v 0 0\n", "mem").unwrap_err();
        assert!(err.to_string().contains("line 1"));
        assert!(parse_obj("v 0 0 0\nv 1 0 0\n", "mem").is_err());
    }

    #[test]
    fn ply_round_trips() {
        let s = icosphere(1);
        let colors: Vec<[u8; 3]> = (0..s.vertex_count()).map(|i| [i as u8, 7, 255]).collect();
        for fmt in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            let bytes = encode_ply(&s, Some(&colors), fmt).unwrap();
            let back = parse_ply(&bytes, "mem").unwrap();
            assert_eq!(back.mesh, s);
            assert_eq!(back.colors.as_deref(), Some(&colors[..]));
            let plain = parse_ply(&encode_ply(&s, None, fmt).unwrap(), "mem").unwrap();
            assert!(plain.colors.is_none());
            for (a, b) in plain.mesh.positions().iter().zip(s.positions()) {
                assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
            }
        }
    }

    #[test]
    fn ply_float32_with_extra_properties() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\ncomment test\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nproperty float nx\nelement face 1\nproperty list uchar uint vertex_index\nend_header\n".to_vec();
        for p in [[0f32, 0., 0., 9.], [1., 0., 0., 9.], [0., 2., 0., 9.]] {
            for c in p {
                bytes.extend_from_slice(&c.to_le_bytes());
            }
        }
        bytes.push(3);
        for i in [0u32, 1, 2] {
            bytes.extend_from_slice(&i.to_le_bytes());
        }
        let m = parse_ply(&bytes, "mem").unwrap().mesh;
        assert_eq!(m.positions()[2], [0.0, 2.0, 0.0]);
        assert_eq!(m.faces(), &[[0, 1, 2]]);
        // truncate the face record
        let err = parse_ply(&bytes[..bytes.len() - 2], "mem").unwrap_err();
        assert!(err.to_string().contains("byte"), "{err}");
    }

    #[test]
    fn ascii_ply_reports_line() {
        let text = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 zz 0\n0 1 0\n";
        let err = parse_ply(text.as_bytes(), "mem").unwrap_err();
        assert!(err.to_string().contains("line 11"), "{err}");
    }
}
