//! Wavefront OBJ subset: `v` and triangular `f` records.

use std::fmt::Write;
use std::path::Path;

use super::{Face, Point, TriangleMesh};
use crate::error::{Error, Result};

// Records that carry no geometry the pipeline needs.
const IGNORED: &[&str] = &["vn", "vt", "vp", "g", "o", "s", "usemtl", "mtllib"];

pub(super) fn parse(path: &Path, text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut raw_faces: Vec<(usize, [i64; 3])> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let Some(kind) = tokens.next() else { continue };
        match kind {
            "v" => {
                let coords: Vec<&str> = tokens.collect();
                if coords.len() < 3 {
                    return Err(Error::parse(path, lineno, "vertex needs 3 coordinates"));
                }
                let mut xyz = [0.0; 3];
                for (slot, tok) in xyz.iter_mut().zip(&coords) {
                    *slot = tok.parse().map_err(|_| {
                        Error::parse(path, lineno, format!("bad coordinate {tok:?}"))
                    })?;
                }
                vertices.push(Point::new(xyz[0], xyz[1], xyz[2]));
            }
            "f" => {
                let idx: Vec<&str> = tokens.collect();
                if idx.len() != 3 {
                    return Err(Error::Unsupported {
                        path: path.into(),
                        what: format!(
                            "face with {} vertices at line {lineno} (only triangles)",
                            idx.len()
                        ),
                    });
                }
                let mut f = [0i64; 3];
                for (slot, tok) in f.iter_mut().zip(&idx) {
                    let head = tok.split('/').next().unwrap_or("");
                    *slot = head.parse().map_err(|_| {
                        Error::parse(path, lineno, format!("bad face index {tok:?}"))
                    })?;
                }
                raw_faces.push((lineno, f));
            }
            k if IGNORED.contains(&k) => {}
            other => {
                return Err(Error::Unsupported {
                    path: path.into(),
                    what: format!("element {other:?} at line {lineno}"),
                })
            }
        }
    }

    let n = vertices.len() as i64;
    let mut faces: Vec<Face> = Vec::with_capacity(raw_faces.len());
    for (lineno, f) in raw_faces {
        let mut face = [0usize; 3];
        for (slot, &i) in face.iter_mut().zip(&f) {
            // 1-based, negative values count back from the end
            let zero_based = if i > 0 { i - 1 } else { n + i };
            if i == 0 || zero_based < 0 || zero_based >= n {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("face index {i} out of range for {n} vertices"),
                ));
            }
            *slot = zero_based as usize;
        }
        faces.push(face);
    }
    TriangleMesh::new(vertices, faces)
}

pub(super) fn write(mesh: &TriangleMesh) -> String {
    let mut out = String::with_capacity(mesh.n_vertices() * 48);
    for v in mesh.vertices() {
        // Display for f64 is the shortest string that round-trips exactly.
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("test.obj")
    }

    #[test]
    fn minimal_triangle() {
        let m = parse(p(), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!(m.n_vertices(), 3);
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn slash_suffixes_and_attributes_ignored() {
        let src = "# cube corner\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nvt 0 0\nf 1/1/1 2//1 3/2\n";
        let m = parse(p(), src).unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn negative_indices() {
        let m = parse(p(), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn out_of_range_reports_line() {
        let err = parse(p(), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 5\n").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 4);
                assert!(message.contains("out of range"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_coordinate_reports_line() {
        let err = parse(p(), "v 0 0 0\nv 1 x 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn quads_and_lines_rejected() {
        let quad = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 4 3\n";
        assert!(matches!(parse(p(), quad), Err(Error::Unsupported { .. })));
        let line = "v 0 0 0\nv 1 0 0\nv 0 1 0\nl 1 2\n";
        assert!(matches!(parse(p(), line), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn write_then_parse_is_exact() {
        let verts = vec![
            Point::new(0.1, -1.0 / 3.0, 1e-17),
            Point::new(123456.789012345, 2.0, -0.0),
            Point::new(std::f64::consts::PI, 1e300, -7.25),
        ];
        let m = TriangleMesh::new(verts, vec![[0, 1, 2], [2, 1, 0]]).unwrap();
        let back = parse(p(), &write(&m)).unwrap();
        assert_eq!(back, m);
    }
}
