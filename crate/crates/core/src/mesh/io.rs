//! ASCII OFF, OBJ and PLY reading and writing.
//!
//! Polygons with more than three corners are fan-triangulated from their
//! first corner. Floats are written with Rust's shortest round-trip
//! formatting, so a save/load cycle reproduces positions bit-exactly.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use super::{Mesh, Point};
use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeshFormat {
    Off,
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "off" => Some(MeshFormat::Off),
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::Ply),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            MeshFormat::Off => "off",
            MeshFormat::Obj => "obj",
            MeshFormat::Ply => "ply",
        }
    }
}

/// Optional per-vertex data carried by PLY files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VertexAttributes {
    pub quality: Option<Vec<f64>>,
    pub colors: Option<Vec<[u8; 3]>>,
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<Mesh> {
    load_mesh_with_attributes(path, format).map(|(m, _)| m)
}

pub fn load_mesh_with_attributes(
    path: &Path,
    format: MeshFormat,
) -> Result<(Mesh, VertexAttributes)> {
    let text = fsutil::read_to_string(path)?;
    read_mesh(&text, format).map_err(|e| match e {
        Error::Parse { location, message } => Error::Parse {
            location: format!("{}:{location}", path.display()),
            message,
        },
        other => other,
    })
}

pub fn save_mesh(mesh: &Mesh, path: &Path, format: MeshFormat) -> Result<()> {
    save_mesh_with_attributes(mesh, &VertexAttributes::default(), path, format)
}

pub fn save_mesh_with_attributes(
    mesh: &Mesh,
    attrs: &VertexAttributes,
    path: &Path,
    format: MeshFormat,
) -> Result<()> {
    check_savable(mesh, attrs)?;
    fsutil::write_atomic(path, |w| write_mesh(mesh, attrs, format, w))
}

fn check_savable(mesh: &Mesh, attrs: &VertexAttributes) -> Result<()> {
    if mesh.vertex_count() == 0 {
        return Err(Error::EmptyMesh("vertices"));
    }
    if mesh.face_count() == 0 {
        return Err(Error::EmptyMesh("faces"));
    }
    let n = mesh.vertex_count();
    if let Some(q) = &attrs.quality {
        if q.len() != n {
            return Err(Error::dims(format!("{n} quality values"), q.len()));
        }
    }
    if let Some(c) = &attrs.colors {
        if c.len() != n {
            return Err(Error::dims(format!("{n} colors"), c.len()));
        }
    }
    Ok(())
}

/// Serializes a mesh. Attributes are only representable in PLY and are
/// silently dropped for the other formats.
pub fn write_mesh(
    mesh: &Mesh,
    attrs: &VertexAttributes,
    format: MeshFormat,
    w: &mut dyn Write,
) -> std::io::Result<()> {
    match format {
        MeshFormat::Off => {
            writeln!(w, "OFF")?;
            writeln!(w, "{} {} 0", mesh.vertex_count(), mesh.face_count())?;
            for v in mesh.vertices() {
                writeln!(w, "{} {} {}", v[0], v[1], v[2])?;
            }
            for f in mesh.faces() {
                writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
            }
        }
        MeshFormat::Obj => {
            for v in mesh.vertices() {
                writeln!(w, "v {} {} {}", v[0], v[1], v[2])?;
            }
            for f in mesh.faces() {
                writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
            }
        }
        MeshFormat::Ply => {
            writeln!(w, "ply")?;
            writeln!(w, "format ascii 1.0")?;
            writeln!(w, "element vertex {}", mesh.vertex_count())?;
            writeln!(w, "property double x")?;
            writeln!(w, "property double y")?;
            writeln!(w, "property double z")?;
            if attrs.quality.is_some() {
                writeln!(w, "property float quality")?;
            }
            if attrs.colors.is_some() {
                writeln!(w, "property uchar red")?;
                writeln!(w, "property uchar green")?;
                writeln!(w, "property uchar blue")?;
            }
            writeln!(w, "element face {}", mesh.face_count())?;
            writeln!(w, "property list uchar int vertex_indices")?;
            writeln!(w, "end_header")?;
            for (i, v) in mesh.vertices().iter().enumerate() {
                write!(w, "{} {} {}", v[0], v[1], v[2])?;
                if let Some(q) = &attrs.quality {
                    write!(w, " {}", q[i])?;
                }
                if let Some(c) = &attrs.colors {
                    write!(w, " {} {} {}", c[i][0], c[i][1], c[i][2])?;
                }
                writeln!(w)?;
            }
            for f in mesh.faces() {
                writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
            }
        }
    }
    Ok(())
}

/// Parses mesh text in the given format.
pub fn read_mesh(text: &str, format: MeshFormat) -> Result<(Mesh, VertexAttributes)> {
    let (vertices, faces, attrs) = match format {
        MeshFormat::Off => {
            let (v, f) = parse_off(text)?;
            (v, f, VertexAttributes::default())
        }
        MeshFormat::Obj => {
            let (v, f) = parse_obj(text)?;
            (v, f, VertexAttributes::default())
        }
        MeshFormat::Ply => parse_ply(text)?,
    };
    if vertices.is_empty() {
        return Err(Error::EmptyMesh("vertices"));
    }
    if faces.is_empty() {
        return Err(Error::EmptyMesh("faces"));
    }
    Ok((Mesh::new(vertices, faces)?, attrs))
}

fn num<T: FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(format!("line {line}"), format!("bad number {tok:?}")))
}

fn fan(poly: &[usize], faces: &mut Vec<[usize; 3]>) {
    for k in 1..poly.len() - 1 {
        faces.push([poly[0], poly[k], poly[k + 1]]);
    }
}

/// Content lines with their 1-based line numbers, comments stripped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_off(text: &str) -> Result<(Vec<Point>, Vec<[usize; 3]>)> {
    let mut lines = content_lines(text);
    let (ln, header) = lines
        .next()
        .ok_or_else(|| Error::parse("line 1", "missing OFF header"))?;
    let mut head = header.split_whitespace();
    if head.next() != Some("OFF") {
        return Err(Error::parse(format!("line {ln}"), "expected OFF header"));
    }
    // Counts may share the header line ("OFF 8 12 0").
    let rest: Vec<&str> = head.collect();
    let (ln, counts): (usize, Vec<&str>) = if rest.is_empty() {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| Error::parse("end of file", "missing counts line"))?;
        (ln, l.split_whitespace().collect())
    } else {
        (ln, rest)
    };
    if counts.len() < 2 {
        return Err(Error::parse(format!("line {ln}"), "expected vertex and face counts"));
    }
    let nv: usize = num(counts[0], ln)?;
    let nf: usize = num(counts[1], ln)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| Error::parse("end of file", "too few vertex lines"))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(Error::parse(format!("line {ln}"), "vertex needs 3 coordinates"));
        }
        vertices.push([num(toks[0], ln)?, num(toks[1], ln)?, num(toks[2], ln)?]);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| Error::parse("end of file", "too few face lines"))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        let k: usize = num(toks[0], ln)?;
        if k < 3 || toks.len() < k + 1 {
            return Err(Error::parse(format!("line {ln}"), "malformed face"));
        }
        let poly = toks[1..=k]
            .iter()
            .map(|t| num::<usize>(t, ln))
            .collect::<Result<Vec<_>>>()?;
        fan(&poly, &mut faces);
    }
    Ok((vertices, faces))
}

fn parse_obj(text: &str) -> Result<(Vec<Point>, Vec<[usize; 3]>)> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, l) in content_lines(text) {
        let mut toks = l.split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<&str> = toks.collect();
                if c.len() < 3 {
                    return Err(Error::parse(format!("line {ln}"), "vertex needs 3 coordinates"));
                }
                vertices.push([num(c[0], ln)?, num(c[1], ln)?, num(c[2], ln)?]);
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in toks {
                    let idx: i64 = num(t.split('/').next().unwrap_or(""), ln)?;
                    let resolved = match idx {
                        0 => {
                            return Err(Error::parse(format!("line {ln}"), "OBJ indices are 1-based"))
                        }
                        i if i > 0 => (i - 1) as usize,
                        // Negative indices count back from the latest vertex.
                        i => {
                            let back = (-i) as usize;
                            if back > vertices.len() {
                                return Err(Error::parse(
                                    format!("line {ln}"),
                                    "relative index points before the first vertex",
                                ));
                            }
                            vertices.len() - back
                        }
                    };
                    poly.push(resolved);
                }
                if poly.len() < 3 {
                    return Err(Error::parse(format!("line {ln}"), "face needs 3 corners"));
                }
                fan(&poly, &mut faces);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

struct PlyElement {
    name: String,
    count: usize,
    props: Vec<PlyProperty>,
}

enum PlyProperty {
    Scalar(String),
    List(String),
}

fn parse_ply(text: &str) -> Result<(Vec<Point>, Vec<[usize; 3]>, VertexAttributes)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(Error::parse("line 1", "missing ply magic")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| Error::parse("end of file", "missing end_header"))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks.first().copied() {
            Some("end_header") => break,
            Some("format") => {
                if toks.get(1) != Some(&"ascii") {
                    return Err(Error::parse(format!("line {ln}"), "only ascii PLY is supported"));
                }
            }
            Some("element") if toks.len() == 3 => elements.push(PlyElement {
                name: toks[1].to_string(),
                count: num(toks[2], ln)?,
                props: Vec::new(),
            }),
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(format!("line {ln}"), "property before element"))?;
                let prop = match toks.get(1) {
                    Some(&"list") if toks.len() == 5 => PlyProperty::List(toks[4].to_string()),
                    Some(_) if toks.len() == 3 => PlyProperty::Scalar(toks[2].to_string()),
                    _ => return Err(Error::parse(format!("line {ln}"), "malformed property")),
                };
                el.props.push(prop);
            }
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => {
                return Err(Error::parse(format!("line {ln}"), format!("unknown header keyword {other}")))
            }
        }
    }

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut quality = None;
    let mut colors = None;
    let mut body = lines.filter(|(_, l)| !l.is_empty());
    for el in &elements {
        let scalar_pos = |name: &str| {
            el.props
                .iter()
                .position(|p| matches!(p, PlyProperty::Scalar(n) if n == name))
        };
        match el.name.as_str() {
            "vertex" => {
                if el.props.iter().any(|p| matches!(p, PlyProperty::List(_))) {
                    return Err(Error::parse("header", "list property on vertex element"));
                }
                let (xi, yi, zi) = match (scalar_pos("x"), scalar_pos("y"), scalar_pos("z")) {
                    (Some(x), Some(y), Some(z)) => (x, y, z),
                    _ => return Err(Error::parse("header", "vertex element needs x, y, z")),
                };
                let qi = scalar_pos("quality");
                let rgb = match (scalar_pos("red"), scalar_pos("green"), scalar_pos("blue")) {
                    (Some(r), Some(g), Some(b)) => Some((r, g, b)),
                    _ => None,
                };
                let mut q = Vec::new();
                let mut c = Vec::new();
                for _ in 0..el.count {
                    let (ln, l) = body
                        .next()
                        .ok_or_else(|| Error::parse("end of file", "too few vertex rows"))?;
                    let toks: Vec<&str> = l.split_whitespace().collect();
                    if toks.len() != el.props.len() {
                        return Err(Error::parse(format!("line {ln}"), "wrong vertex row width"));
                    }
                    vertices.push([num(toks[xi], ln)?, num(toks[yi], ln)?, num(toks[zi], ln)?]);
                    if let Some(qi) = qi {
                        q.push(num(toks[qi], ln)?);
                    }
                    if let Some((r, g, b)) = rgb {
                        c.push([num(toks[r], ln)?, num(toks[g], ln)?, num(toks[b], ln)?]);
                    }
                }
                quality = qi.map(|_| q);
                colors = rgb.map(|_| c);
            }
            "face" => {
                let li = el
                    .props
                    .iter()
                    .position(|p| {
                        matches!(p, PlyProperty::List(n) if n == "vertex_indices" || n == "vertex_index")
                    })
                    .ok_or_else(|| Error::parse("header", "face element needs vertex_indices"))?;
                for _ in 0..el.count {
                    let (ln, l) = body
                        .next()
                        .ok_or_else(|| Error::parse("end of file", "too few face rows"))?;
                    let toks: Vec<&str> = l.split_whitespace().collect();
                    // Walk the row, skipping over properties that precede the index list.
                    let mut pos = 0;
                    let mut poly = Vec::new();
                    for (pi, p) in el.props.iter().enumerate() {
                        let tok = toks
                            .get(pos)
                            .ok_or_else(|| Error::parse(format!("line {ln}"), "short face row"))?;
                        match p {
                            PlyProperty::Scalar(_) => pos += 1,
                            PlyProperty::List(_) => {
                                let k: usize = num(tok, ln)?;
                                if toks.len() < pos + 1 + k {
                                    return Err(Error::parse(format!("line {ln}"), "short face row"));
                                }
                                if pi == li {
                                    poly = toks[pos + 1..pos + 1 + k]
                                        .iter()
                                        .map(|t| num::<usize>(t, ln))
                                        .collect::<Result<Vec<_>>>()?;
                                }
                                pos += 1 + k;
                            }
                        }
                    }
                    if poly.len() < 3 {
                        return Err(Error::parse(format!("line {ln}"), "face needs 3 corners"));
                    }
                    fan(&poly, &mut faces);
                }
            }
            _ => {
                for _ in 0..el.count {
                    body.next()
                        .ok_or_else(|| Error::parse("end of file", "truncated element"))?;
                }
            }
        }
    }
    Ok((vertices, faces, VertexAttributes { quality, colors }))
}
