//! Body-centered-cubic tetrahedralization of an occupancy grid.
//!
//! The lattice is the grid corners plus the cell centers. Every face shared by
//! two cells, at least one of them occupied, contributes four tets
//! `(center_a, center_b, p, q)`, one per face edge `(p, q)`. The tets restricted
//! to one cell tile it completely, so occupied cells are covered and the half
//! of each tet that reaches into an empty neighbour adds at most one cell of
//! dilation.

use super::{MeshError, TetMesh, VoxelGrid};
use crate::math::tet_signed_volume;
use crate::Vec3;

/// Lattice bookkeeping with a one-cell pad on every side, so faces towards
/// cells outside the grid stay addressable.
struct Lattice {
    dims: [usize; 3],
    origin: Vec3,
    h: f64,
}

impl Lattice {
    fn corner_dims(&self) -> [usize; 3] {
        self.dims.map(|d| d + 3)
    }

    fn center_dims(&self) -> [usize; 3] {
        self.dims.map(|d| d + 2)
    }

    /// Corner `(i, j, k)` in grid coordinates, `-1 ..= dims + 1`.
    fn corner_slot(&self, c: [i64; 3]) -> usize {
        let d = self.corner_dims();
        let s = c.map(|v| (v + 1) as usize);
        s[0] + d[0] * (s[1] + d[1] * s[2])
    }

    /// Cell center `(i, j, k)` in grid coordinates, `-1 ..= dims`.
    fn center_slot(&self, c: [i64; 3]) -> usize {
        let d = self.center_dims();
        let s = c.map(|v| (v + 1) as usize);
        s[0] + d[0] * (s[1] + d[1] * s[2])
    }

    fn corner_pos(&self, slot: usize) -> Vec3 {
        let d = self.corner_dims();
        let (i, j, k) = (slot % d[0], (slot / d[0]) % d[1], slot / (d[0] * d[1]));
        self.origin + Vec3::new(i as f64 - 1.0, j as f64 - 1.0, k as f64 - 1.0) * self.h
    }

    fn center_pos(&self, slot: usize) -> Vec3 {
        let d = self.center_dims();
        let (i, j, k) = (slot % d[0], (slot / d[0]) % d[1], slot / (d[0] * d[1]));
        self.origin + Vec3::new(i as f64 - 0.5, j as f64 - 0.5, k as f64 - 0.5) * self.h
    }
}

enum Node {
    Corner(usize),
    Center(usize),
}

/// Visits every BCC tet as `[center_a, center_b, p, q]` lattice nodes.
fn for_each_tet(grid: &VoxelGrid, lattice: &Lattice, mut f: impl FnMut([Node; 4])) {
    let [nx, ny, nz] = grid.dims.map(|d| d as i64);
    for k in -1..nz {
        for j in -1..ny {
            for i in -1..nx {
                let a = [i, j, k];
                let occ_a = grid.get_signed(i, j, k);
                for axis in 0..3 {
                    let mut b = a;
                    b[axis] += 1;
                    let occ_b = grid.get_signed(b[0], b[1], b[2]);
                    if !occ_a && !occ_b {
                        continue;
                    }
                    let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                    let corner = |du: i64, dv: i64| {
                        let mut c = a;
                        c[axis] += 1;
                        c[u] += du;
                        c[v] += dv;
                        lattice.corner_slot(c)
                    };
                    let ring = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
                    for e in 0..4 {
                        f([
                            Node::Center(lattice.center_slot(a)),
                            Node::Center(lattice.center_slot(b)),
                            Node::Corner(ring[e]),
                            Node::Corner(ring[(e + 1) % 4]),
                        ]);
                    }
                }
            }
        }
    }
}

fn used_nodes(grid: &VoxelGrid, lattice: &Lattice) -> (Vec<bool>, Vec<bool>) {
    let cd = lattice.corner_dims();
    let zd = lattice.center_dims();
    let mut corners = vec![false; cd[0] * cd[1] * cd[2]];
    let mut centers = vec![false; zd[0] * zd[1] * zd[2]];
    for_each_tet(grid, lattice, |nodes| {
        for n in nodes {
            match n {
                Node::Corner(s) => corners[s] = true,
                Node::Center(s) => centers[s] = true,
            }
        }
    });
    (corners, centers)
}

fn lattice_for(grid: &VoxelGrid) -> Lattice {
    Lattice {
        dims: grid.dims,
        origin: grid.origin,
        h: grid.cell_size,
    }
}

/// Vertex count [`tetrahedralize`] would produce, without building the mesh.
pub fn tet_vertex_count(grid: &VoxelGrid) -> usize {
    let lattice = lattice_for(grid);
    let (corners, centers) = used_nodes(grid, &lattice);
    corners.iter().filter(|&&u| u).count() + centers.iter().filter(|&&u| u).count()
}

/// BCC tet mesh covering every occupied voxel.
///
/// Vertices are numbered corners first, then centers, each in grid order, so
/// the output is deterministic.
pub fn tetrahedralize(grid: &VoxelGrid) -> Result<TetMesh, MeshError> {
    let lattice = lattice_for(grid);
    let (corners, centers) = used_nodes(grid, &lattice);
    let mut corner_index = vec![u32::MAX; corners.len()];
    let mut center_index = vec![u32::MAX; centers.len()];
    let mut vertices = Vec::new();
    for (slot, used) in corners.iter().enumerate() {
        if *used {
            corner_index[slot] = vertices.len() as u32;
            vertices.push(lattice.corner_pos(slot));
        }
    }
    for (slot, used) in centers.iter().enumerate() {
        if *used {
            center_index[slot] = vertices.len() as u32;
            vertices.push(lattice.center_pos(slot));
        }
    }
    let mut tets = Vec::new();
    for_each_tet(grid, &lattice, |nodes| {
        let mut t = nodes.map(|n| match n {
            Node::Corner(s) => corner_index[s],
            Node::Center(s) => center_index[s],
        });
        let [a, b, c, d] = t.map(|i| vertices[i as usize]);
        if tet_signed_volume(&a, &b, &c, &d) < 0.0 {
            t.swap(2, 3);
        }
        tets.push(t);
    });
    TetMesh::new(vertices, tets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::barycentric;
    use crate::meshgen::voxel::voxelize;
    use std::collections::HashMap;

    fn ball(n: usize, r: f64) -> VoxelGrid {
        let mut g = VoxelGrid::empty(Vec3::zeros(), 0.5, [n, n, n]);
        let c = n as f64 / 2.0;
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let p = Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5)
                        - Vec3::repeat(c);
                    if p.norm() <= r {
                        g.set(i, j, k, true);
                    }
                }
            }
        }
        g
    }

    #[test]
    fn single_voxel_is_covered() {
        let g = voxelize(&[Vec3::new(0.2, 0.3, 0.4)], 1.0).unwrap();
        let m = tetrahedralize(&g).unwrap();
        // 6 faces x 4 edges.
        assert_eq!(m.tets.len(), 24);
        assert!(m.rest_volume.iter().all(|&v| v > 0.0));
        let cell_lo = g.origin + Vec3::repeat(1.0);
        // Sample the voxel cube on a lattice, including its boundary.
        let steps = 8;
        for a in 0..=steps {
            for b in 0..=steps {
                for c in 0..=steps {
                    let p = cell_lo
                        + Vec3::new(a as f64, b as f64, c as f64) / steps as f64;
                    let inside = m.tets.iter().any(|t| {
                        let x = t.map(|i| m.vertices[i as usize]);
                        barycentric(&x, &p).unwrap().iter().all(|&w| w >= -1e-9)
                    });
                    assert!(inside, "{p:?} not covered");
                }
            }
        }
    }

    #[test]
    fn volume_bounds() {
        let g = ball(12, 4.0);
        let m = tetrahedralize(&g).unwrap();
        let cell_vol = g.cell_size.powi(3);
        let occupied = g.occupied_count() as f64 * cell_vol;
        let dilated = g.dilate(1).occupied_count() as f64 * cell_vol;
        let total: f64 = m.rest_volume.iter().sum();
        assert!(total >= occupied - 1e-9);
        assert!(total <= dilated + 1e-9);
    }

    #[test]
    fn conforming_faces() {
        let g = ball(10, 3.5);
        let m = tetrahedralize(&g).unwrap();
        let mut faces: HashMap<[u32; 3], usize> = HashMap::new();
        let mut seen = std::collections::HashSet::new();
        for t in &m.tets {
            let mut s = *t;
            s.sort();
            assert!(seen.insert(s), "duplicate tet");
            for skip in 0..4 {
                let mut f: Vec<u32> = (0..4).filter(|&i| i != skip).map(|i| t[i]).collect();
                f.sort();
                *faces.entry([f[0], f[1], f[2]]).or_default() += 1;
            }
        }
        assert!(faces.values().all(|&c| c == 1 || c == 2));
        assert!(faces.values().any(|&c| c == 2));
        assert_eq!(tet_vertex_count(&g), m.vertices.len());
    }

    #[test]
    fn vertex_count_grows_with_resolution() {
        let pts: Vec<Vec3> = (0..4000)
            .map(|i| {
                let t = i as f64 * 0.618;
                let z = (i as f64 / 4000.0) * 2.0 - 1.0;
                let r = (1.0 - z * z).sqrt();
                Vec3::new(r * (t * std::f64::consts::TAU).cos(), r * (t * std::f64::consts::TAU).sin(), z)
            })
            .collect();
        let mut last = 0;
        for cs in [0.8, 0.5, 0.3, 0.2] {
            let g = crate::meshgen::fill_interior(&voxelize(&pts, cs).unwrap());
            let n = tet_vertex_count(&g);
            assert!(n > last, "cell size {cs}: {n} <= {last}");
            last = n;
        }
    }
}
