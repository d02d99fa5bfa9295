//! PLY reading (ascii and binary little-endian) and writing.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::voxel::PointCloud;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Encoding {
    Ascii,
    BinaryLe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => f64::from(b[0] as i8),
            Self::U8 => f64::from(b[0]),
            Self::I16 => f64::from(i16::from_le_bytes([b[0], b[1]])),
            Self::U16 => f64::from(u16::from_le_bytes([b[0], b[1]])),
            Self::I32 => f64::from(i32::from_le_bytes(b[..4].try_into().unwrap())),
            Self::U32 => f64::from(u32::from_le_bytes(b[..4].try_into().unwrap())),
            Self::F32 => f64::from(f32::from_le_bytes(b[..4].try_into().unwrap())),
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Clone, Debug)]
enum Property {
    Scalar(String, ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Clone, Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    /// Byte offset of the payload.
    body: usize,
    /// Line number of the first payload line (1-based).
    body_line: usize,
}

fn parse_err(location: String, message: impl Into<String>) -> Error {
    Error::Parse {
        location,
        message: message.into(),
    }
}

fn line_err(line: usize, message: impl Into<String>) -> Error {
    parse_err(format!("line {line}"), message)
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0usize;
    let mut line_no = 0usize;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| line_err(line_no + 1, "header is not terminated by end_header"))?;
        line_no += 1;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| line_err(line_no, "header is not valid text"))?
            .trim_end_matches('\r');
        pos += end + 1;
        let mut words = line.split_whitespace();
        let keyword = words.next().unwrap_or("");
        if line_no == 1 {
            if line != "ply" {
                return Err(line_err(1, "missing 'ply' magic"));
            }
            continue;
        }
        match keyword {
            "format" => {
                encoding = Some(match words.next() {
                    Some("ascii") => Encoding::Ascii,
                    Some("binary_little_endian") => Encoding::BinaryLe,
                    Some("binary_big_endian") => {
                        return Err(Error::Unsupported("big-endian PLY".into()));
                    }
                    other => return Err(line_err(line_no, format!("unknown format {other:?}"))),
                });
            }
            "comment" | "obj_info" | "" => {}
            "element" => {
                let name = words
                    .next()
                    .ok_or_else(|| line_err(line_no, "element without name"))?;
                let count = words
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| line_err(line_no, "element count is not an integer"))?;
                elements.push(Element {
                    name: name.to_owned(),
                    count,
                    properties: Vec::new(),
                });
            }
            "property" => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| line_err(line_no, "property before any element"))?;
                let ty = words
                    .next()
                    .ok_or_else(|| line_err(line_no, "property without type"))?;
                let bad_type = |t: &str| line_err(line_no, format!("unknown property type '{t}'"));
                let prop = if ty == "list" {
                    let count = words.next().unwrap_or("");
                    let item = words.next().unwrap_or("");
                    Property::List {
                        count: ScalarType::parse(count).ok_or_else(|| bad_type(count))?,
                        item: ScalarType::parse(item).ok_or_else(|| bad_type(item))?,
                    }
                } else {
                    let name = words
                        .next()
                        .ok_or_else(|| line_err(line_no, "property without name"))?;
                    Property::Scalar(
                        name.to_owned(),
                        ScalarType::parse(ty).ok_or_else(|| bad_type(ty))?,
                    )
                };
                element.properties.push(prop);
            }
            "end_header" => break,
            other => {
                return Err(line_err(
                    line_no,
                    format!("unexpected header keyword '{other}'"),
                ))
            }
        }
    }
    Ok(Header {
        encoding: encoding.ok_or_else(|| line_err(line_no, "missing format line"))?,
        elements,
        body: pos,
        body_line: line_no + 1,
    })
}

/// Column of `x`, `y`, `z` in the vertex element.
fn xyz_columns(vertex: &Element) -> Result<[usize; 3]> {
    let mut cols = [usize::MAX; 3];
    for (i, p) in vertex.properties.iter().enumerate() {
        if let Property::Scalar(name, ty) = p {
            let axis = match name.as_str() {
                "x" => 0,
                "y" => 1,
                "z" => 2,
                _ => continue,
            };
            if !matches!(ty, ScalarType::F32 | ScalarType::F64) {
                return Err(parse_err(
                    "header".into(),
                    format!("property {name} must be float or double"),
                ));
            }
            cols[axis] = i;
        }
    }
    if cols.contains(&usize::MAX) {
        return Err(parse_err("header".into(), "vertex element lacks x, y or z"));
    }
    Ok(cols)
}

pub fn parse(bytes: &[u8]) -> Result<PointCloud> {
    let header = parse_header(bytes)?;
    let Some(vi) = header.elements.iter().position(|e| e.name == "vertex") else {
        return Ok(PointCloud::default());
    };
    let cols = xyz_columns(&header.elements[vi])?;
    match header.encoding {
        Encoding::Ascii => parse_ascii(bytes, &header, vi, cols),
        Encoding::BinaryLe => parse_binary(bytes, &header, vi, cols),
    }
}

fn parse_ascii(bytes: &[u8], header: &Header, vi: usize, cols: [usize; 3]) -> Result<PointCloud> {
    let text = std::str::from_utf8(&bytes[header.body..]).map_err(|_| {
        parse_err(
            format!("byte offset {}", header.body),
            "payload is not valid text",
        )
    })?;
    let mut lines = text.lines();
    let mut line_no = header.body_line - 1;
    let mut points = Vec::with_capacity(header.elements[vi].count.min(bytes.len()));
    for (ei, element) in header.elements.iter().enumerate().take(vi + 1) {
        for _ in 0..element.count {
            line_no += 1;
            let line = lines
                .next()
                .ok_or_else(|| line_err(line_no, format!("truncated {} data", element.name)))?;
            if ei != vi {
                continue;
            }
            let values = line
                .split_whitespace()
                .map(|w| w.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| line_err(line_no, "non-numeric value"))?;
            // Position of every property, shifted past preceding lists.
            let mut at = Vec::with_capacity(element.properties.len());
            let mut idx = 0usize;
            for p in &element.properties {
                at.push(idx);
                idx += match p {
                    Property::Scalar(..) => 1,
                    Property::List { .. } => {
                        1 + values.get(idx).map_or(0, |&n| n.max(0.0) as usize)
                    }
                };
            }
            if values.len() < idx {
                return Err(line_err(
                    line_no,
                    format!("expected {idx} values, found {}", values.len()),
                ));
            }
            points.push(std::array::from_fn(|a| values[at[cols[a]]]));
        }
    }
    Ok(PointCloud::new(points))
}

fn parse_binary(bytes: &[u8], header: &Header, vi: usize, cols: [usize; 3]) -> Result<PointCloud> {
    let mut pos = header.body;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        let end = pos.checked_add(n).filter(|&e| e <= bytes.len());
        let end =
            end.ok_or_else(|| parse_err(format!("byte offset {}", *pos), "truncated payload"))?;
        let s = &bytes[*pos..end];
        *pos = end;
        Ok(s)
    };
    let fixed_row = |e: &Element| -> Option<usize> {
        e.properties
            .iter()
            .map(|p| match p {
                Property::Scalar(_, t) => Some(t.size()),
                Property::List { .. } => None,
            })
            .sum()
    };
    let mut points = Vec::new();
    for (ei, element) in header.elements.iter().enumerate().take(vi + 1) {
        if ei == vi {
            points.reserve(element.count.min(bytes.len()));
        }
        if let (Some(row), true) = (fixed_row(element), ei == vi) {
            let mut offsets = [0usize; 3];
            let mut types = [ScalarType::F32; 3];
            for (a, &c) in cols.iter().enumerate() {
                offsets[a] = element.properties[..c]
                    .iter()
                    .map(|p| match p {
                        Property::Scalar(_, t) => t.size(),
                        Property::List { .. } => 0,
                    })
                    .sum();
                if let Property::Scalar(_, t) = element.properties[c] {
                    types[a] = t;
                }
            }
            let total = row
                .checked_mul(element.count)
                .ok_or_else(|| parse_err("header".into(), "vertex count overflows"))?;
            let data = take(&mut pos, total)?;
            for r in data.chunks_exact(row.max(1)).take(element.count) {
                points.push(std::array::from_fn(|a| types[a].read_le(&r[offsets[a]..])));
            }
            continue;
        }
        for _ in 0..element.count {
            let mut xyz = [0.0; 3];
            for (pi, p) in element.properties.iter().enumerate() {
                match p {
                    Property::Scalar(_, t) => {
                        let v = t.read_le(take(&mut pos, t.size())?);
                        if let Some(a) = cols.iter().position(|&c| c == pi) {
                            xyz[a] = v;
                        }
                    }
                    Property::List { count, item } => {
                        let n = count.read_le(take(&mut pos, count.size())?);
                        if n.is_nan() || n < 0.0 {
                            return Err(parse_err(
                                format!("byte offset {pos}"),
                                "negative list length",
                            ));
                        }
                        take(&mut pos, n as usize * item.size())?;
                    }
                }
            }
            if ei == vi {
                points.push(xyz);
            }
        }
    }
    if vi + 1 == header.elements.len() && pos != bytes.len() {
        return Err(parse_err(
            format!("byte offset {pos}"),
            format!("{} trailing bytes after vertex data", bytes.len() - pos),
        ));
    }
    Ok(PointCloud::new(points))
}

fn header_text(encoding: &str, n: usize, ty: &str) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "ply\nformat {encoding} 1.0\nelement vertex {n}\nproperty {ty} x\nproperty {ty} y\nproperty {ty} z\nend_header\n"
    );
    s
}

/// Binary little-endian PLY; single precision when that is lossless.
pub fn to_binary(pc: &PointCloud) -> Vec<u8> {
    let single = pc
        .points
        .iter()
        .flatten()
        .all(|&v| f64::from(v as f32).to_bits() == v.to_bits());
    let ty = if single { "float" } else { "double" };
    let mut out = header_text("binary_little_endian", pc.len(), ty).into_bytes();
    out.reserve(pc.len() * if single { 12 } else { 24 });
    for &v in pc.points.iter().flatten() {
        if single {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        } else {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn to_ascii(pc: &PointCloud) -> Vec<u8> {
    let mut s = header_text("ascii", pc.len(), "double");
    for p in &pc.points {
        let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
    }
    s.into_bytes()
}
