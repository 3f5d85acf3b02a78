//! Minimal PLY support: the `vertex` element with `x`, `y`, `z` and optional
//! `red`, `green`, `blue`. Other elements and properties are parsed and skipped.

use std::io::Write;
use std::path::Path;

use super::{label_palette, PointCloud};
use crate::error::{Error, Result};
use crate::partition::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ascii,
    Little,
    Big,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(Error::Format(format!("unknown PLY type '{other}'"))),
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

    fn decode(self, bytes: &[u8], big: bool) -> f64 {
        macro_rules! num {
            ($t:ty, $n:expr) => {{
                let arr: [u8; $n] = bytes[..$n].try_into().unwrap();
                (if big { <$t>::from_be_bytes(arr) } else { <$t>::from_le_bytes(arr) }) as f64
            }};
        }
        match self {
            Scalar::I8 => bytes[0] as i8 as f64,
            Scalar::U8 => bytes[0] as f64,
            Scalar::I16 => num!(i16, 2),
            Scalar::U16 => num!(u16, 2),
            Scalar::I32 => num!(i32, 4),
            Scalar::U32 => num!(u32, 4),
            Scalar::F32 => num!(f32, 4),
            Scalar::F64 => num!(f64, 8),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    format: Format,
    elements: Vec<Element>,
    body_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0;
    let mut lines = Vec::new();
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("PLY header is not terminated by end_header".into()))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| Error::Format("PLY header is not valid text".into()))?
            .trim_end_matches('\r')
            .trim()
            .to_string();
        pos += end + 1;
        if line == "end_header" {
            break;
        }
        lines.push(line);
    }
    if lines.first().map(String::as_str) != Some("ply") {
        return Err(Error::Format("missing 'ply' magic line".into()));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in &lines[1..] {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", f, _version] => {
                format = Some(match *f {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::Little,
                    "binary_big_endian" => Format::Big,
                    other => return Err(Error::Format(format!("unknown PLY format '{other}'"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::Format(format!("bad element count '{count}'")))?,
                properties: Vec::new(),
            }),
            ["property", "list", count_t, item_t, _name] => elements
                .last_mut()
                .ok_or_else(|| Error::Format("property before any element".into()))?
                .properties
                .push(Property::List(
                    Scalar::parse(count_t)?,
                    Scalar::parse(item_t)?,
                )),
            ["property", t, name] => elements
                .last_mut()
                .ok_or_else(|| Error::Format("property before any element".into()))?
                .properties
                .push(Property::Scalar(name.to_string(), Scalar::parse(t)?)),
            _ => return Err(Error::Format(format!("malformed PLY header line '{line}'"))),
        }
    }
    Ok(Header {
        format: format.ok_or_else(|| Error::Format("PLY header has no format line".into()))?,
        elements,
        body_start: pos,
    })
}

/// Reads a point cloud from PLY bytes.
pub fn read_ply(bytes: &[u8]) -> Result<PointCloud> {
    let header = parse_header(bytes)?;
    let vertex = header
        .elements
        .iter()
        .find(|e| e.name == "vertex")
        .ok_or_else(|| Error::Format("PLY has no vertex element".into()))?;
    let index_of = |n: &str| {
        vertex
            .properties
            .iter()
            .position(|p| matches!(p, Property::Scalar(name, _) if name == n))
    };
    let xyz = ["x", "y", "z"].map(index_of);
    let [Some(ix), Some(iy), Some(iz)] = xyz else {
        return Err(Error::Format("vertex element lacks x, y, z properties".into()));
    };
    let rgb = match ["red", "green", "blue"].map(index_of) {
        [Some(r), Some(g), Some(b)] => Some([r, g, b]),
        _ => None,
    };

    let mut positions = Vec::with_capacity(vertex.count);
    let mut colors = rgb.map(|_| Vec::with_capacity(vertex.count));
    let mut take = |values: &[f64]| {
        positions.push([values[ix], values[iy], values[iz]]);
        if let (Some(c), Some([r, g, b])) = (colors.as_mut(), rgb) {
            c.push([values[r], values[g], values[b]].map(|v| v.clamp(0.0, 255.0) as u8));
        }
    };

    match header.format {
        Format::Ascii => {
            let body = std::str::from_utf8(&bytes[header.body_start..])
                .map_err(|_| Error::Format("ASCII PLY body is not valid text".into()))?;
            let mut lines = body.lines().filter(|l| !l.trim().is_empty());
            for element in &header.elements {
                for i in 0..element.count {
                    let line = lines.next().ok_or_else(|| {
                        Error::Format(format!("PLY ends inside element '{}' ({i})", element.name))
                    })?;
                    if element.name != "vertex" {
                        continue;
                    }
                    let values = line
                        .split_whitespace()
                        .map(|t| {
                            t.parse::<f64>()
                                .map_err(|_| Error::Format(format!("bad PLY number '{t}'")))
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    if element.properties.iter().any(|p| matches!(p, Property::List(..))) {
                        return Err(Error::Format("list properties on vertices are not supported".into()));
                    }
                    if values.len() < element.properties.len() {
                        return Err(Error::Format(format!("vertex {i} has too few values")));
                    }
                    take(&values);
                }
            }
        }
        Format::Little | Format::Big => {
            let big = header.format == Format::Big;
            let mut pos = header.body_start;
            let need = |pos: usize, n: usize| {
                if pos + n > bytes.len() {
                    Err(Error::Format("binary PLY body is truncated".into()))
                } else {
                    Ok(())
                }
            };
            let mut values = Vec::new();
            for element in &header.elements {
                for _ in 0..element.count {
                    values.clear();
                    for p in &element.properties {
                        match p {
                            Property::Scalar(_, t) => {
                                need(pos, t.size())?;
                                values.push(t.decode(&bytes[pos..], big));
                                pos += t.size();
                            }
                            Property::List(ct, it) => {
                                need(pos, ct.size())?;
                                let count = ct.decode(&bytes[pos..], big) as usize;
                                pos += ct.size();
                                need(pos, count * it.size())?;
                                pos += count * it.size();
                                values.push(f64::NAN);
                            }
                        }
                    }
                    if element.name == "vertex" {
                        take(&values);
                    }
                }
            }
        }
    }
    PointCloud::new(positions, colors)
}

pub fn load_pointcloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_ply(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Serializes positions as doubles, colors as uchar, and an optional `label` uint.
pub fn write_ply(
    cloud: &PointCloud,
    labels: Option<&[usize]>,
    encoding: PlyEncoding,
) -> Vec<u8> {
    let mut out = Vec::new();
    let fmt = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    let _ = writeln!(out, "ply\nformat {fmt} 1.0\nelement vertex {}", cloud.len());
    out.extend_from_slice(b"property double x\nproperty double y\nproperty double z\n");
    if cloud.colors().is_some() {
        out.extend_from_slice(b"property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    if labels.is_some() {
        out.extend_from_slice(b"property uint label\n");
    }
    out.extend_from_slice(b"end_header\n");
    for (i, p) in cloud.positions().iter().enumerate() {
        let color = cloud.colors().map(|c| c[i]);
        let label = labels.map(|l| l[i] as u32);
        match encoding {
            PlyEncoding::Ascii => {
                // `{:?}` on f64 prints the shortest repr that round-trips
                let _ = write!(out, "{:?} {:?} {:?}", p[0], p[1], p[2]);
                if let Some(c) = color {
                    let _ = write!(out, " {} {} {}", c[0], c[1], c[2]);
                }
                if let Some(l) = label {
                    let _ = write!(out, " {l}");
                }
                out.push(b'\n');
            }
            PlyEncoding::BinaryLittleEndian => {
                for v in p {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                if let Some(c) = color {
                    out.extend_from_slice(&c);
                }
                if let Some(l) = label {
                    out.extend_from_slice(&l.to_le_bytes());
                }
            }
        }
    }
    out
}

/// Writes the cloud with each point colored by its cluster (and its label id).
pub fn write_labeled_pointcloud(
    cloud: &PointCloud,
    partition: &Partition,
    path: impl AsRef<Path>,
    encoding: PlyEncoding,
) -> Result<()> {
    let path = path.as_ref();
    if partition.n_nodes() != cloud.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} points",
            partition.n_nodes(),
            cloud.len()
        )));
    }
    let palette = label_palette(partition.n_clusters());
    let colored = PointCloud::new(
        cloud.positions().to_vec(),
        Some(partition.labels().iter().map(|&l| palette[l]).collect()),
    )?;
    let bytes = write_ply(&colored, Some(partition.labels()), encoding);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
