//! `tetmesh v1` text format and OBJ export.

use std::fmt::Write as _;

use super::{MeshError, TetMesh, TriMesh};
use crate::Vec3;

/// ```text
/// tetmesh v1
/// verts N
/// x y z        (N lines)
/// tets M
/// a b c d      (M lines, zero-based)
/// ```
pub fn write_tetmesh(mesh: &TetMesh) -> String {
    let mut s = String::with_capacity(32 * (mesh.vertices.len() + mesh.tets.len()) + 32);
    s.push_str("tetmesh v1\n");
    let _ = writeln!(s, "verts {}", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
    }
    let _ = writeln!(s, "tets {}", mesh.tets.len());
    for t in &mesh.tets {
        let _ = writeln!(s, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    s
}

pub fn read_tetmesh(text: &str) -> Result<TetMesh, MeshError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let err = |line: usize, message: &str| MeshError::Parse {
        line,
        message: message.to_string(),
    };
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| err(0, &format!("unexpected end of input, expected {what}")))
    };

    let (l, header) = next("header")?;
    if header != "tetmesh v1" {
        return Err(err(l, "expected `tetmesh v1`"));
    }
    let count = |l: usize, line: &str, key: &str| -> Result<usize, MeshError> {
        line.strip_prefix(key)
            .and_then(|r| r.trim().parse().ok())
            .ok_or_else(|| err(l, &format!("expected `{key} <count>`")))
    };
    let (l, line) = next("verts")?;
    let n = count(l, line, "verts")?;
    let mut vertices = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        let (l, line) = next("vertex")?;
        let v: Vec<f64> = line
            .split_ascii_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| err(l, "bad coordinate"))?;
        if v.len() != 3 || !v.iter().all(|c| c.is_finite()) {
            return Err(err(l, "expected 3 finite coordinates"));
        }
        vertices.push(Vec3::new(v[0], v[1], v[2]));
    }
    let (l, line) = next("tets")?;
    let m = count(l, line, "tets")?;
    let mut tets = Vec::with_capacity(m.min(1 << 24));
    for _ in 0..m {
        let (l, line) = next("tet")?;
        let t: Vec<u32> = line
            .split_ascii_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| err(l, "bad index"))?;
        if t.len() != 4 {
            return Err(err(l, "expected 4 indices"));
        }
        tets.push([t[0], t[1], t[2], t[3]]);
    }
    TetMesh::new(vertices, tets)
}

/// Wavefront OBJ (1-based indices).
pub fn write_obj(mesh: &TriMesh) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshgen::{tetrahedralize, voxelize};

    #[test]
    fn tetmesh_text_round_trip() {
        let pts = [Vec3::new(0.1, 0.2, 0.3), Vec3::new(1.7, -0.4, 0.9)];
        let mesh = tetrahedralize(&voxelize(&pts, 0.37).unwrap()).unwrap();
        let text = write_tetmesh(&mesh);
        assert!(text.starts_with("tetmesh v1\nverts "));
        assert_eq!(read_tetmesh(&text).unwrap(), mesh);
    }

    #[test]
    fn parse_errors_carry_line() {
        let e = read_tetmesh("tetmesh v1\nverts 1\n0 0\n").unwrap_err();
        assert!(matches!(e, MeshError::Parse { line: 3, .. }));
        assert!(read_tetmesh("tetmesh v2\n").is_err());
    }

    #[test]
    fn obj_export() {
        let mesh = TriMesh {
            vertices: vec![Vec3::zeros(), Vec3::x(), Vec3::y()],
            triangles: vec![[0, 1, 2]],
        };
        assert!(write_obj(&mesh).ends_with("f 1 2 3\n"));
    }
}
