//! OBJ and PLY mesh input, PLY point-cloud and mesh output.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::Point3;

use super::TriangleMesh;
use crate::error::{NbvError, Result};

/// Loads an OBJ or PLY mesh, chosen by extension.
///
/// With `normalize`, the mesh is translated and scaled so its bounding box
/// fits the unit cube centered at the origin.
pub fn load_mesh(path: &Path, normalize: bool) -> Result<TriangleMesh> {
    let bytes = fs::read(path).map_err(|e| NbvError::io(path, e))?;
    let name = path.display().to_string();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    let (vertices, faces) = match ext.as_str() {
        "obj" => parse_obj(&bytes, &name)?,
        "ply" => parse_ply(&bytes, &name)?,
        other => {
            return Err(NbvError::Format {
                path: name,
                line: 0,
                message: format!("unsupported mesh extension `{other}` (expected obj or ply)"),
            })
        }
    };
    let mesh = TriangleMesh::new(vertices, faces)?;
    if normalize {
        mesh.normalized_to_unit_cube()
    } else {
        Ok(mesh)
    }
}

fn format_err(path: &str, line: usize, message: impl Into<String>) -> NbvError {
    NbvError::Format {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

type Parsed = (Vec<Point3<f64>>, Vec<[u32; 3]>);

/// Parses `v` and `f` records; polygons are fan-triangulated. Face indices are
/// 1-based, negative indices are relative to the end of the vertex list.
pub fn parse_obj(bytes: &[u8], path: &str) -> Result<Parsed> {
    let text = std::str::from_utf8(bytes).map_err(|_| format_err(path, 0, "file is not valid UTF-8"))?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| format_err(path, line_no, format!("bad vertex coordinate: {e}")))?;
                if coords.len() != 3 {
                    return Err(format_err(path, line_no, "vertex needs three coordinates"));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in tokens {
                    let first = t.split('/').next().unwrap_or("");
                    let k: i64 = first
                        .parse()
                        .map_err(|_| format_err(path, line_no, format!("bad face index `{t}`")))?;
                    let resolved = match k {
                        0 => return Err(format_err(path, line_no, "face index 0 is invalid (indices are 1-based)")),
                        k if k > 0 => k - 1,
                        k => vertices.len() as i64 + k,
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(format_err(path, line_no, format!("face index {k} out of range")));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(format_err(path, line_no, "face needs at least three vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    if vertices.is_empty() || faces.is_empty() {
        return Err(NbvError::invalid(format!("{path}: mesh is empty")));
    }
    Ok((vertices, faces))
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum PlyFormat {
    Ascii,
    BinaryLe,
    BinaryBe,
}

#[derive(Clone, Copy, Debug)]
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
    fn parse(name: &str) -> Option<Scalar> {
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

    fn read_binary(self, buf: &[u8], fmt: PlyFormat) -> f64 {
        macro_rules! rd {
            ($t:ty) => {{
                let arr: [u8; std::mem::size_of::<$t>()] = buf.try_into().unwrap();
                (if fmt == PlyFormat::BinaryLe {
                    <$t>::from_le_bytes(arr)
                } else {
                    <$t>::from_be_bytes(arr)
                }) as f64
            }};
        }
        match self {
            Scalar::I8 => rd!(i8),
            Scalar::U8 => rd!(u8),
            Scalar::I16 => rd!(i16),
            Scalar::U16 => rd!(u16),
            Scalar::I32 => rd!(i32),
            Scalar::U32 => rd!(u32),
            Scalar::F32 => rd!(f32),
            Scalar::F64 => rd!(f64),
        }
    }
}

#[derive(Clone, Debug)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Clone, Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

/// Parses ASCII or binary PLY with `vertex` (x, y, z) and `face`
/// (`vertex_indices` or `vertex_index` list) elements.
pub fn parse_ply(bytes: &[u8], path: &str) -> Result<Parsed> {
    let mut reader = BufReader::new(bytes);
    let mut line_no = 0usize;
    let next_line = |reader: &mut BufReader<&[u8]>, line_no: &mut usize| -> Result<String> {
        let mut s = String::new();
        let n = reader
            .read_line(&mut s)
            .map_err(|e| format_err(path, *line_no + 1, e.to_string()))?;
        *line_no += 1;
        if n == 0 {
            return Err(format_err(path, *line_no, "unexpected end of header"));
        }
        Ok(s.trim().to_string())
    };

    if next_line(&mut reader, &mut line_no)? != "ply" {
        return Err(format_err(path, 1, "missing `ply` magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line = next_line(&mut reader, &mut line_no)?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", f, _] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLe,
                    "binary_big_endian" => PlyFormat::BinaryBe,
                    other => return Err(format_err(path, line_no, format!("unknown format `{other}`"))),
                })
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| format_err(path, line_no, "bad element count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", ct, it, name] => {
                let (Some(c), Some(i)) = (Scalar::parse(ct), Scalar::parse(it)) else {
                    return Err(format_err(path, line_no, "bad list property type"));
                };
                elements
                    .last_mut()
                    .ok_or_else(|| format_err(path, line_no, "property before element"))?
                    .properties
                    .push(Property::List(name.to_string(), c, i));
            }
            ["property", ty, name] => {
                let s = Scalar::parse(ty).ok_or_else(|| format_err(path, line_no, format!("bad property type `{ty}`")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| format_err(path, line_no, "property before element"))?
                    .properties
                    .push(Property::Scalar(name.to_string(), s));
            }
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] | [] => {}
            _ => return Err(format_err(path, line_no, format!("unrecognized header line `{line}`"))),
        }
    }
    let format = format.ok_or_else(|| format_err(path, line_no, "missing format line"))?;

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut body = Vec::new();
    reader
        .read_to_end(&mut body)
        .map_err(|e| format_err(path, line_no, e.to_string()))?;

    let mut ascii_lines = if format == PlyFormat::Ascii {
        Some(std::str::from_utf8(&body).map_err(|_| format_err(path, line_no, "body is not UTF-8"))?.lines())
    } else {
        None
    };
    let mut cursor = 0usize;

    for el in &elements {
        for _ in 0..el.count {
            let mut xyz = [0.0f64; 3];
            let mut list: Vec<i64> = Vec::new();
            match ascii_lines.as_mut() {
                Some(lines) => {
                    line_no += 1;
                    let l = lines
                        .next()
                        .ok_or_else(|| format_err(path, line_no, format!("truncated `{}` element", el.name)))?;
                    let mut toks = l.split_whitespace();
                    let mut num = || -> Result<f64> {
                        toks.next()
                            .ok_or_else(|| format_err(path, line_no, "missing value"))?
                            .parse::<f64>()
                            .map_err(|_| format_err(path, line_no, "bad number"))
                    };
                    for p in &el.properties {
                        match p {
                            Property::Scalar(name, _) => {
                                let v = num()?;
                                assign_xyz(name, v, &mut xyz);
                            }
                            Property::List(name, _, _) => {
                                let n = num()? as usize;
                                let mut vals = Vec::with_capacity(n);
                                for _ in 0..n {
                                    vals.push(num()? as i64);
                                }
                                if is_face_list(name) {
                                    list = vals;
                                }
                            }
                        }
                    }
                }
                None => {
                    let mut take = |s: Scalar| -> Result<f64> {
                        let end = cursor + s.size();
                        if end > body.len() {
                            return Err(format_err(path, line_no, format!("truncated binary `{}` element", el.name)));
                        }
                        let v = s.read_binary(&body[cursor..end], format);
                        cursor = end;
                        Ok(v)
                    };
                    for p in &el.properties {
                        match p {
                            Property::Scalar(name, s) => {
                                let v = take(*s)?;
                                assign_xyz(name, v, &mut xyz);
                            }
                            Property::List(name, cs, is) => {
                                let n = take(*cs)? as usize;
                                let mut vals = Vec::with_capacity(n);
                                for _ in 0..n {
                                    vals.push(take(*is)? as i64);
                                }
                                if is_face_list(name) {
                                    list = vals;
                                }
                            }
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => vertices.push(Point3::from(xyz)),
                "face" => {
                    if list.len() < 3 {
                        return Err(format_err(path, line_no, "face needs at least three vertices"));
                    }
                    if list.iter().any(|&i| i < 0) {
                        return Err(format_err(path, line_no, "negative face index"));
                    }
                    for k in 1..list.len() - 1 {
                        faces.push([list[0] as u32, list[k] as u32, list[k + 1] as u32]);
                    }
                }
                _ => {}
            }
        }
    }
    if vertices.is_empty() || faces.is_empty() {
        return Err(NbvError::invalid(format!("{path}: mesh is empty")));
    }
    Ok((vertices, faces))
}

fn assign_xyz(name: &str, v: f64, xyz: &mut [f64; 3]) {
    match name {
        "x" => xyz[0] = v,
        "y" => xyz[1] = v,
        "z" => xyz[2] = v,
        _ => {}
    }
}

fn is_face_list(name: &str) -> bool {
    name == "vertex_indices" || name == "vertex_index"
}

/// Writes a mesh as binary little-endian PLY.
pub fn write_mesh_ply(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices().len(),
        mesh.face_count()
    )
    .expect("write to memory");
    for v in mesh.vertices() {
        for c in v.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    for f in mesh.faces() {
        out.push(3);
        for i in f {
            out.extend_from_slice(&(*i as i32).to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| NbvError::io(path, e))
}

/// Writes a mesh as OBJ.
pub fn write_mesh_obj(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let mut out = String::new();
    for v in mesh.vertices() {
        out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for f in mesh.faces() {
        out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    fs::write(path, out).map_err(|e| NbvError::io(path, e))
}

/// Writes a point cloud as ASCII PLY.
pub fn write_points_ply(points: &[Point3<f64>], path: &Path) -> Result<()> {
    let mut out = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        points.len()
    );
    for p in points {
        out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    fs::write(path, out).map_err(|e| NbvError::io(path, e))
}
