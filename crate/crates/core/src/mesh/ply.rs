//! ASCII PLY with a `vertex` element (x, y, z) and a triangular `face` list.

use std::fmt::Write;
use std::path::Path;

use super::{Face, Point, TriangleMesh};
use crate::error::{Error, Result};

struct ElementDecl {
    name: String,
    count: usize,
    props: Vec<PropDecl>,
}

enum PropDecl {
    Scalar(String),
    List(String),
}

impl PropDecl {
    fn name(&self) -> &str {
        match self {
            PropDecl::Scalar(n) | PropDecl::List(n) => n,
        }
    }
}

pub(super) fn parse(path: &Path, bytes: &[u8]) -> Result<TriangleMesh> {
    // Binary bodies are not valid UTF-8 in general; only the header is
    // inspected before rejecting them.
    let text = String::from_utf8_lossy(bytes);
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(Error::parse(path, 1, "missing 'ply' magic")),
    }

    let mut elements: Vec<ElementDecl> = Vec::new();
    let mut saw_format = false;
    loop {
        let Some((lineno, line)) = lines.next() else {
            return Err(Error::parse(path, 0, "header not terminated by end_header"));
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some("format") => {
                match toks.get(1).copied() {
                    Some("ascii") => {}
                    Some(f @ ("binary_little_endian" | "binary_big_endian")) => {
                        return Err(Error::Unsupported {
                            path: path.into(),
                            what: format!("PLY format {f} (only ascii is supported)"),
                        })
                    }
                    _ => return Err(Error::parse(path, lineno, "bad format line")),
                }
                saw_format = true;
            }
            Some("element") => {
                let (Some(name), Some(count)) = (toks.get(1), toks.get(2)) else {
                    return Err(Error::parse(path, lineno, "bad element line"));
                };
                let count = count
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, "bad element count"))?;
                if *name != "vertex" && *name != "face" {
                    return Err(Error::Unsupported {
                        path: path.into(),
                        what: format!("PLY element {name:?} at line {lineno}"),
                    });
                }
                elements.push(ElementDecl {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let Some(el) = elements.last_mut() else {
                    return Err(Error::parse(path, lineno, "property before element"));
                };
                let prop = if toks.get(1) == Some(&"list") {
                    match toks.get(4) {
                        Some(n) => PropDecl::List(n.to_string()),
                        None => return Err(Error::parse(path, lineno, "bad list property")),
                    }
                } else {
                    match toks.get(2) {
                        Some(n) => PropDecl::Scalar(n.to_string()),
                        None => return Err(Error::parse(path, lineno, "bad property")),
                    }
                };
                el.props.push(prop);
            }
            Some(other) => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("unexpected header keyword {other:?}"),
                ))
            }
        }
    }
    if !saw_format {
        return Err(Error::parse(path, 0, "missing format line"));
    }

    let mut vertices = Vec::new();
    let mut faces: Vec<(usize, Face)> = Vec::new();
    for el in &elements {
        match el.name.as_str() {
            "vertex" => {
                let pos = |axis: &str| {
                    el.props
                        .iter()
                        .position(|p| matches!(p, PropDecl::Scalar(n) if n == axis))
                        .ok_or_else(|| {
                            Error::parse(path, 0, format!("vertex element lacks property {axis}"))
                        })
                };
                let (ix, iy, iz) = (pos("x")?, pos("y")?, pos("z")?);
                if el.props.iter().any(|p| matches!(p, PropDecl::List(_))) {
                    return Err(Error::Unsupported {
                        path: path.into(),
                        what: "list property on vertex element".into(),
                    });
                }
                for _ in 0..el.count {
                    let (lineno, line) = next_data(path, &mut lines)?;
                    let vals: Vec<&str> = line.split_whitespace().collect();
                    if vals.len() != el.props.len() {
                        return Err(Error::parse(
                            path,
                            lineno,
                            format!("expected {} values, got {}", el.props.len(), vals.len()),
                        ));
                    }
                    let get = |i: usize| -> Result<f64> {
                        vals[i].parse().map_err(|_| {
                            Error::parse(path, lineno, format!("bad number {:?}", vals[i]))
                        })
                    };
                    vertices.push(Point::new(get(ix)?, get(iy)?, get(iz)?));
                }
            }
            "face" => {
                if el.props.len() != 1
                    || !matches!(&el.props[0], PropDecl::List(n) if n == "vertex_indices" || n == "vertex_index")
                {
                    return Err(Error::Unsupported {
                        path: path.into(),
                        what: format!(
                            "face properties {:?} (expected a single vertex_indices list)",
                            el.props.iter().map(PropDecl::name).collect::<Vec<_>>()
                        ),
                    });
                }
                for _ in 0..el.count {
                    let (lineno, line) = next_data(path, &mut lines)?;
                    let vals: Vec<&str> = line.split_whitespace().collect();
                    if vals.first() != Some(&"3") || vals.len() != 4 {
                        return Err(Error::Unsupported {
                            path: path.into(),
                            what: format!("non-triangular face at line {lineno}"),
                        });
                    }
                    let mut f = [0usize; 3];
                    for (slot, tok) in f.iter_mut().zip(&vals[1..]) {
                        *slot = tok.parse().map_err(|_| {
                            Error::parse(path, lineno, format!("bad face index {tok:?}"))
                        })?;
                    }
                    faces.push((lineno, f));
                }
            }
            _ => unreachable!("rejected while parsing the header"),
        }
    }
    let n = vertices.len();
    let mut out = Vec::with_capacity(faces.len());
    for (lineno, f) in faces {
        if let Some(bad) = f.iter().find(|&&i| i >= n) {
            return Err(Error::parse(
                path,
                lineno,
                format!("face index {bad} out of range for {n} vertices"),
            ));
        }
        out.push(f);
    }
    TriangleMesh::new(vertices, out)
}

fn next_data<'a>(
    path: &Path,
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
) -> Result<(usize, &'a str)> {
    for (lineno, line) in lines.by_ref() {
        if !line.is_empty() {
            return Ok((lineno, line));
        }
    }
    Err(Error::parse(path, 0, "unexpected end of file in PLY body"))
}

pub(super) fn write(mesh: &TriangleMesh) -> String {
    let mut out = String::with_capacity(mesh.n_vertices() * 48 + 256);
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", mesh.n_vertices());
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    let _ = writeln!(out, "element face {}", mesh.faces().len());
    out.push_str("property list uchar int vertex_indices\nend_header\n");
    for v in mesh.vertices() {
        let _ = writeln!(out, "{} {} {}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    out
}
