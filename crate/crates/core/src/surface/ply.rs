use std::fmt::Write as _;

use super::SurfaceMesh;
use crate::error::{Error, Result};
use crate::numeric::{Real, Vec3};

/// ASCII PLY 1.0 with `x y z nx ny nz scalar` per vertex and a face list.
///
/// Values are written in shortest round-trip form, so parsing and
/// re-exporting reproduces the bytes exactly.
pub fn export_ply<T: Real>(mesh: &SurfaceMesh<T>) -> Vec<u8> {
    let ty = if std::mem::size_of::<T>() == 4 { "float" } else { "double" };
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\ncomment amptcr surface mesh\n");
    let _ = writeln!(s, "element vertex {}", mesh.vertices.len());
    for name in ["x", "y", "z", "nx", "ny", "nz", "scalar"] {
        let _ = writeln!(s, "property {ty} {name}");
    }
    let _ = writeln!(s, "element face {}", mesh.triangles.len());
    s.push_str("property list uchar int vertex_indices\nend_header\n");
    for i in 0..mesh.vertices.len() {
        let v = mesh.vertices[i];
        let n = mesh.vertex_normals.get(i).copied().unwrap_or_default();
        let q = mesh.vertex_scalars.get(i).copied().unwrap_or_default();
        let _ = writeln!(s, "{} {} {} {} {} {} {}", v[0], v[1], v[2], n[0], n[1], n[2], q);
    }
    for [a, b, c] in &mesh.triangles {
        let _ = writeln!(s, "3 {a} {b} {c}");
    }
    s.into_bytes()
}

/// Reads the ASCII layout written by [`export_ply`].
pub fn parse_ply<T: Real>(bytes: &[u8]) -> Result<SurfaceMesh<T>> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::parse(0, "PLY is not UTF-8"))?;
    let mut lines = text.lines().enumerate();
    let (mut n_vert, mut n_face) = (None, None);
    let mut props = Vec::new();
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(Error::parse(1, "missing ply magic")),
    }
    for (i, line) in lines.by_ref() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", "1.0"] => {}
            ["format", ..] => return Err(Error::parse(i + 1, "only ascii 1.0 PLY is supported")),
            ["comment", ..] => {}
            ["element", "vertex", n] => n_vert = n.parse::<usize>().ok(),
            ["element", "face", n] => n_face = n.parse::<usize>().ok(),
            ["property", "list", ..] => {}
            ["property", _, name] => props.push(name.to_string()),
            ["end_header"] => break,
            _ => return Err(Error::parse(i + 1, format!("unexpected header line {line:?}"))),
        }
    }
    let expected = ["x", "y", "z", "nx", "ny", "nz", "scalar"];
    if props != expected {
        return Err(Error::parse(0, format!("unsupported vertex properties {props:?}")));
    }
    let (n_vert, n_face) = match (n_vert, n_face) {
        (Some(v), Some(f)) => (v, f),
        _ => return Err(Error::parse(0, "header lacks vertex/face counts")),
    };
    let mut mesh = SurfaceMesh {
        vertices: Vec::with_capacity(n_vert),
        triangles: Vec::with_capacity(n_face),
        vertex_scalars: Vec::with_capacity(n_vert),
        vertex_normals: Vec::with_capacity(n_vert),
    };
    for _ in 0..n_vert {
        let (i, line) = lines.next().ok_or_else(|| Error::parse(0, "truncated vertex list"))?;
        let vals = line
            .split_whitespace()
            .map(|t| T::from_str_radix(t, 10))
            .collect::<std::result::Result<Vec<T>, _>>()
            .map_err(|_| Error::parse(i + 1, "bad vertex value"))?;
        if vals.len() != 7 {
            return Err(Error::parse(i + 1, "vertex line needs 7 values"));
        }
        mesh.vertices.push(Vec3::new(vals[0], vals[1], vals[2]));
        mesh.vertex_normals.push(Vec3::new(vals[3], vals[4], vals[5]));
        mesh.vertex_scalars.push(vals[6]);
    }
    for _ in 0..n_face {
        let (i, line) = lines.next().ok_or_else(|| Error::parse(0, "truncated face list"))?;
        let idx = line
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::parse(i + 1, "bad face index"))?;
        if idx.len() != 4 || idx[0] != 3 || idx[1..].iter().any(|&v| v >= n_vert) {
            return Err(Error::parse(i + 1, "face must be a valid triangle"));
        }
        mesh.triangles.push([idx[1], idx[2], idx[3]]);
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_triangle() -> SurfaceMesh<f64> {
        let mut m = SurfaceMesh::from_triangles(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.1, 0.3)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        m.vertex_scalars = vec![-0.25, 1.0 / 3.0, 0.1];
        m
    }

    #[test]
    fn header_counts() {
        let text = String::from_utf8(export_ply(&one_triangle())).unwrap();
        assert!(text.contains("element vertex 3\n"));
        assert!(text.contains("element face 1\n"));
        assert!(text.starts_with("ply\nformat ascii 1.0\n"));
    }

    #[test]
    fn export_parse_export_is_stable() {
        let m = one_triangle();
        let a = export_ply(&m);
        let back: SurfaceMesh<f64> = parse_ply(&a).unwrap();
        assert_eq!(back, m);
        assert_eq!(export_ply(&back), a);
    }

    #[test]
    fn f32_meshes_round_trip() {
        let m = one_triangle();
        let m32 = SurfaceMesh {
            vertices: m.vertices.iter().map(|v| v.cast::<f32>()).collect(),
            triangles: m.triangles.clone(),
            vertex_scalars: m.vertex_scalars.iter().map(|&s| s as f32).collect(),
            vertex_normals: m.vertex_normals.iter().map(|v| v.cast::<f32>()).collect(),
        };
        let a = export_ply(&m32);
        assert!(String::from_utf8_lossy(&a).contains("property float x"));
        let back: SurfaceMesh<f32> = parse_ply(&a).unwrap();
        assert_eq!(back, m32);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_ply::<f64>(b"not a ply").is_err());
        assert!(parse_ply::<f64>(b"ply\nformat binary_little_endian 1.0\nend_header\n").is_err());
    }
}
