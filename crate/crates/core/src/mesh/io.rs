//! Plain-text mesh export.
//!
//! ```text
//! # mae-mesh v1 | vertex rows: index x y boundary(0|1) | triangle rows: i j k (0-based, counterclockwise)
//! vertices 4
//! 0 0.0 0.0 1
//! ...
//! triangles 2
//! 0 1 2
//! ...
//! ```
//!
//! Coordinates are written with 17 significant digits so a read-back mesh is
//! bit-identical.

use std::io::{BufRead, Write};

use super::TriMesh;
use crate::error::{MaeError, Result};

/// First line of every mesh file.
pub const MESH_HEADER: &str =
    "# mae-mesh v1 | vertex rows: index x y boundary(0|1) | triangle rows: i j k (0-based, counterclockwise)";

pub fn write_mesh<W: Write>(mesh: &TriMesh, mut out: W) -> Result<()> {
    writeln!(out, "{MESH_HEADER}")?;
    writeln!(out, "vertices {}", mesh.num_vertices())?;
    for (i, (p, &b)) in mesh.vertices.iter().zip(&mesh.boundary_mask).enumerate() {
        writeln!(out, "{i} {:.16e} {:.16e} {}", p[0], p[1], u8::from(b))?;
    }
    writeln!(out, "triangles {}", mesh.num_triangles())?;
    for t in &mesh.triangles {
        writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

pub fn read_mesh<R: BufRead>(input: R, h_target: f64) -> Result<TriMesh> {
    let bad = |msg: String| MaeError::DegenerateMesh(format!("mesh file: {msg}"));
    let mut lines = input
        .lines()
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty() || s.starts_with('#')));
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| bad("unexpected end of file".into()))?
            .map_err(MaeError::from)
    };
    let count = |line: String, key: &str| -> Result<usize> {
        line.strip_prefix(key)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad(format!("expected `{key} <count>`, got `{line}`")))
    };

    let nv = count(next()?, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    let mut mask = Vec::with_capacity(nv);
    for i in 0..nv {
        let line = next()?;
        let f: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| bad(format!("bad number `{s}`")))
        };
        if f.len() != 4 || f[0].parse::<usize>().ok() != Some(i) {
            return Err(bad(format!("bad vertex row `{line}`")));
        }
        vertices.push([parse(f[1])?, parse(f[2])?]);
        mask.push(f[3] == "1");
    }
    let nt = count(next()?, "triangles")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let line = next()?;
        let idx: Vec<usize> = line
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| bad(format!("bad index `{s}`"))))
            .collect::<Result<_>>()?;
        if idx.len() != 3 {
            return Err(bad(format!("bad triangle row `{line}`")));
        }
        triangles.push([idx[0], idx[1], idx[2]]);
    }
    TriMesh::new(vertices, triangles, mask, h_target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut m = TriMesh::structured_unit_square(3).unwrap();
        m.vertices[5][0] += 1.0 / 3.0 * 1e-3;
        let m = TriMesh::new(m.vertices, m.triangles, m.boundary_mask, m.h_target).unwrap();
        let mut buf = Vec::new();
        write_mesh(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(MESH_HEADER));
        let back = read_mesh(buf.as_slice(), m.h_target).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.boundary_mask, m.boundary_mask);
    }

    #[test]
    fn truncated_file_is_an_error() {
        let text = format!("{MESH_HEADER}\nvertices 2\n0 0 0 1\n");
        assert!(read_mesh(text.as_bytes(), 1.0).is_err());
    }
}
