//! Marching cubes on a binary occupancy field.
//!
//! Samples sit at voxel centers and the iso level is 0.5, so every surface
//! vertex is the midpoint of a cube edge. The 256-case table is derived at
//! first use from per-face rules instead of being typed in: on each cube face
//! every "entry" crossing is paired with the next "exit" crossing
//! counter-clockwise, which always separates diagonally opposite occupied
//! corners. Both cubes sharing a face apply the same rule, so the surface is
//! crack-free and every edge is shared by exactly two triangles.

use std::sync::OnceLock;

use super::{TriMesh, VoxelGrid};
use crate::Vec3;

/// Corner `c` has offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// 12 cube edges as `(lower corner, axis)`.
fn cube_edges() -> [(usize, usize); 12] {
    let mut edges = [(0, 0); 12];
    let mut n = 0;
    for axis in 0..3 {
        for c in 0..8 {
            if c & (1 << axis) == 0 {
                edges[n] = (c, axis);
                n += 1;
            }
        }
    }
    edges
}

fn edge_between(a: usize, b: usize) -> usize {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let axis = (hi ^ lo).trailing_zeros() as usize;
    cube_edges()
        .iter()
        .position(|&(c, ax)| c == lo && ax == axis)
        .expect("corners are adjacent")
}

/// Face corner cycles, counter-clockwise seen from outside the cube.
fn cube_faces() -> Vec<[usize; 4]> {
    let mut faces = Vec::new();
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in 0..2 {
            let corner = |du: usize, dv: usize| (side << axis) | (du << u) | (dv << v);
            let mut f = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
            let p = |c: usize| {
                let o = corner_offset(c);
                Vec3::new(o[0] as f64, o[1] as f64, o[2] as f64)
            };
            let n = (p(f[1]) - p(f[0])).cross(&(p(f[2]) - p(f[1])));
            let outward = if side == 1 { 1.0 } else { -1.0 };
            if n[axis] * outward < 0.0 {
                f.reverse();
            }
            faces.push(f);
        }
    }
    faces
}

type CaseTable = Vec<Vec<[u8; 3]>>;

fn build_table() -> CaseTable {
    let faces = cube_faces();
    let mut table = Vec::with_capacity(256);
    for case in 0..256usize {
        let inside = |c: usize| case & (1 << c) != 0;
        let mut next = [usize::MAX; 12];
        for f in &faces {
            // (position on face, edge id, is_exit)
            let mut crossings = Vec::new();
            for k in 0..4 {
                let (a, b) = (f[k], f[(k + 1) % 4]);
                if inside(a) != inside(b) {
                    crossings.push((k, edge_between(a, b), inside(a)));
                }
            }
            for (i, &(_, entry_edge, is_exit)) in crossings.iter().enumerate() {
                if is_exit {
                    continue;
                }
                let n = crossings.len();
                let exit_edge = (1..n)
                    .map(|d| crossings[(i + d) % n])
                    .find(|c| c.2)
                    .map(|c| c.1)
                    .expect("crossings alternate");
                next[exit_edge] = entry_edge;
            }
        }
        let mut visited = [false; 12];
        let mut tris = Vec::new();
        for start in 0..12 {
            if next[start] == usize::MAX || visited[start] {
                continue;
            }
            let mut lp = Vec::new();
            let mut e = start;
            while !visited[e] {
                visited[e] = true;
                lp.push(e);
                e = next[e];
            }
            for w in 1..lp.len() - 1 {
                // Loop order is inward-facing; emit reversed for outward normals.
                tris.push([lp[0] as u8, lp[w + 1] as u8, lp[w] as u8]);
            }
        }
        table.push(tris);
    }
    table
}

fn case_table() -> &'static CaseTable {
    static TABLE: OnceLock<CaseTable> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

/// Number of triangles emitted for each of the 256 corner configurations.
pub fn case_triangle_counts() -> [usize; 256] {
    let t = case_table();
    std::array::from_fn(|i| t[i].len())
}

/// Extracts the closed, outward-oriented occupancy isosurface.
pub fn marching_cubes(grid: &VoxelGrid) -> TriMesh {
    let table = case_table();
    let edges = cube_edges();
    let [nx, ny, nz] = grid.dims;
    let mut mesh = TriMesh::default();
    if nx < 2 || ny < 2 || nz < 2 {
        return mesh;
    }
    // Three slots per sample: its +x, +y and +z edges.
    let mut vertex_of_edge = vec![u32::MAX; grid.len() * 3];
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let mut case = 0usize;
                for c in 0..8 {
                    let o = corner_offset(c);
                    if grid.get(i + o[0], j + o[1], k + o[2]) {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                for tri in &table[case] {
                    let mut idx = [0u32; 3];
                    for (slot, &e) in idx.iter_mut().zip(tri.iter()) {
                        let (c, axis) = edges[e as usize];
                        let o = corner_offset(c);
                        let (si, sj, sk) = (i + o[0], j + o[1], k + o[2]);
                        let key = grid.index(si, sj, sk) * 3 + axis;
                        if vertex_of_edge[key] == u32::MAX {
                            let mut p = grid.cell_center(si, sj, sk);
                            p[axis] += 0.5 * grid.cell_size;
                            vertex_of_edge[key] = mesh.vertices.len() as u32;
                            mesh.vertices.push(p);
                        }
                        *slot = vertex_of_edge[key];
                    }
                    mesh.triangles.push(idx);
                }
            }
        }
    }
    mesh
}
