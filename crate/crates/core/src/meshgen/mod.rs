//! Simulation cage generation from splat centers.
//!
//! Pipeline: [`voxelize`] the centers, [`fill_interior`] voids, optionally
//! dilate, then [`tetrahedralize`] the occupied cells on a BCC lattice.
//! [`marching_cubes`] extracts the matching watertight surface for inspection.

mod bcc;
mod io;
mod marching_cubes;
mod voxel;

use std::collections::HashMap;

use thiserror::Error;

pub use bcc::{tet_vertex_count, tetrahedralize};
pub use io::{read_tetmesh, write_obj, write_tetmesh};
pub use marching_cubes::{case_triangle_counts, marching_cubes};
pub use voxel::{fill_interior, voxelize, VoxelGrid};

use crate::math::{edge_basis, tet_signed_volume};
use crate::{Mat3, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("no input points")]
    EmptyInput,
    #[error("point {index} is not finite")]
    NonFinitePoint { index: usize },
    #[error("invalid cell size {0}")]
    InvalidCellSize(f64),
    #[error("grid would exceed 4096 cells per axis")]
    GridTooLarge,
    #[error("tet {index} has non-positive rest volume {volume:e}")]
    DegenerateTet { index: usize, volume: f64 },
    #[error("tet {index} references vertex {vertex} out of range")]
    IndexOutOfRange { index: usize, vertex: u32 },
    #[error("tetmesh line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no cell size gives a vertex count in [{lo}, {hi}] (closest {closest})")]
    BandNotReached { lo: usize, hi: usize, closest: usize },
}

/// Indexed triangle mesh.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriMesh {
    /// Undirected edge → number of incident triangles.
    pub fn edge_counts(&self) -> HashMap<(u32, u32), usize> {
        let mut edges = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Edges not shared by exactly two triangles.
    pub fn boundary_edges(&self) -> Vec<(u32, u32)> {
        let mut out: Vec<_> = self
            .edge_counts()
            .into_iter()
            .filter(|&(_, c)| c != 2)
            .map(|(e, _)| e)
            .collect();
        out.sort();
        out
    }

    /// `V - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_counts().len() as i64 + self.triangles.len() as i64
    }

    /// Enclosed volume by the divergence theorem; positive for outward normals.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }
}

/// Tetrahedral cage with precomputed rest-shape data.
#[derive(Debug, Clone, PartialEq)]
pub struct TetMesh {
    pub vertices: Vec<Vec3>,
    pub tets: Vec<[u32; 4]>,
    /// Inverse of `[x1 - x0, x2 - x0, x3 - x0]` at rest.
    pub rest_inverse_basis: Vec<Mat3>,
    pub rest_volume: Vec<f64>,
}

impl TetMesh {
    /// Validates indices and orientation and precomputes rest data.
    pub fn new(vertices: Vec<Vec3>, tets: Vec<[u32; 4]>) -> Result<Self, MeshError> {
        let mut rest_inverse_basis = Vec::with_capacity(tets.len());
        let mut rest_volume = Vec::with_capacity(tets.len());
        for (index, t) in tets.iter().enumerate() {
            if let Some(&vertex) = t.iter().find(|&&v| v as usize >= vertices.len()) {
                return Err(MeshError::IndexOutOfRange { index, vertex });
            }
            let x = t.map(|i| vertices[i as usize]);
            let volume = tet_signed_volume(&x[0], &x[1], &x[2], &x[3]);
            let inv = edge_basis(&x).try_inverse();
            match inv {
                Some(inv) if volume > 0.0 => {
                    rest_inverse_basis.push(inv);
                    rest_volume.push(volume);
                }
                _ => return Err(MeshError::DegenerateTet { index, volume }),
            }
        }
        Ok(Self {
            vertices,
            tets,
            rest_inverse_basis,
            rest_volume,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn tet_positions(&self, t: usize) -> [Vec3; 4] {
        self.tets[t].map(|i| self.vertices[i as usize])
    }

    /// Concatenates meshes, offsetting indices.
    pub fn concat<'a>(meshes: impl IntoIterator<Item = &'a TetMesh>) -> TetMesh {
        let mut out = TetMesh {
            vertices: Vec::new(),
            tets: Vec::new(),
            rest_inverse_basis: Vec::new(),
            rest_volume: Vec::new(),
        };
        for m in meshes {
            let off = out.vertices.len() as u32;
            out.vertices.extend_from_slice(&m.vertices);
            out.tets.extend(m.tets.iter().map(|t| t.map(|i| i + off)));
            out.rest_inverse_basis.extend_from_slice(&m.rest_inverse_basis);
            out.rest_volume.extend_from_slice(&m.rest_volume);
        }
        out
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }
}

/// How the cage resolution is chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct CageOptions {
    /// Fixed cell size; when `None` the size is searched to hit `vertex_band`.
    pub cell_size: Option<f64>,
    pub vertex_band: (usize, usize),
    /// Occupancy dilation (cells) applied before tetrahedralization.
    pub dilation: usize,
}

impl Default for CageOptions {
    fn default() -> Self {
        Self {
            cell_size: None,
            vertex_band: (10_000, 30_000),
            dilation: 1,
        }
    }
}

/// Output of [`build_cage`].
#[derive(Debug, Clone)]
pub struct Cage {
    /// Voxelized and filled occupancy, before dilation.
    pub filled: VoxelGrid,
    pub mesh: TetMesh,
    pub cell_size: f64,
}

fn cage_grid(points: &[Vec3], cell_size: f64, dilation: usize) -> Result<(VoxelGrid, VoxelGrid), MeshError> {
    let filled = fill_interior(&voxelize(points, cell_size)?);
    let dilated = filled.dilate(dilation);
    Ok((filled, dilated))
}

/// Bisects (in log space) over the cell size until the cage vertex count lands
/// in `band`.
pub fn select_cell_size(
    points: &[Vec3],
    band: (usize, usize),
    dilation: usize,
) -> Result<f64, MeshError> {
    let (lo_count, hi_count) = band;
    if points.is_empty() {
        return Err(MeshError::EmptyInput);
    }
    let count = |cs: f64| -> Result<usize, MeshError> {
        let (_, g) = cage_grid(points, cs, dilation)?;
        Ok(tet_vertex_count(&g))
    };
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let extent = (hi - lo).max().max(1e-6);

    // Coarse side: few vertices. Fine side: many.
    let mut coarse = extent;
    let mut closest = count(coarse)?;
    let in_band = |n: usize| n >= lo_count && n <= hi_count;
    if in_band(closest) {
        return Ok(coarse);
    }
    let mut guard = 0;
    while closest > hi_count && guard < 20 {
        coarse *= 2.0;
        closest = count(coarse)?;
        if in_band(closest) {
            return Ok(coarse);
        }
        guard += 1;
    }
    let mut fine = coarse / 2.0;
    let mut fine_count = count(fine)?;
    while fine_count < lo_count {
        if in_band(fine_count) {
            return Ok(fine);
        }
        fine /= 2.0;
        if extent / fine > 2048.0 {
            return Err(MeshError::BandNotReached {
                lo: lo_count,
                hi: hi_count,
                closest: fine_count,
            });
        }
        fine_count = count(fine)?;
    }
    if in_band(fine_count) {
        return Ok(fine);
    }
    let mut best = fine_count;
    for _ in 0..60 {
        let mid = (coarse * fine).sqrt();
        let n = count(mid)?;
        if in_band(n) {
            return Ok(mid);
        }
        if n.abs_diff((lo_count + hi_count) / 2) < best.abs_diff((lo_count + hi_count) / 2) {
            best = n;
        }
        if n > hi_count {
            fine = mid;
        } else {
            coarse = mid;
        }
    }
    Err(MeshError::BandNotReached {
        lo: lo_count,
        hi: hi_count,
        closest: best,
    })
}

/// Voxelize → fill → dilate → BCC tetrahedralize.
pub fn build_cage(points: &[Vec3], options: &CageOptions) -> Result<Cage, MeshError> {
    let cell_size = match options.cell_size {
        Some(cs) => cs,
        None => select_cell_size(points, options.vertex_band, options.dilation)?,
    };
    let (filled, dilated) = cage_grid(points, cell_size, options.dilation)?;
    let mesh = tetrahedralize(&dilated)?;
    Ok(Cage {
        filled,
        mesh,
        cell_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_points(n: usize, r: f64) -> Vec<Vec3> {
        // Fibonacci sphere.
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let rr = (1.0 - y * y).sqrt();
                let t = golden * i as f64;
                Vec3::new(rr * t.cos(), y, rr * t.sin()) * r
            })
            .collect()
    }

    #[test]
    fn band_search_lands_in_band() {
        let pts = sphere_points(20_000, 1.0);
        let cs = select_cell_size(&pts, (2_000, 4_000), 1).unwrap();
        let cage = build_cage(
            &pts,
            &CageOptions {
                cell_size: Some(cs),
                vertex_band: (0, 0),
                dilation: 1,
            },
        )
        .unwrap();
        let n = cage.mesh.vertex_count();
        assert!((2_000..=4_000).contains(&n), "{n}");
    }

    #[test]
    fn pipeline_is_deterministic() {
        let pts = sphere_points(3000, 1.0);
        let opts = CageOptions {
            cell_size: Some(0.25),
            ..CageOptions::default()
        };
        let a = build_cage(&pts, &opts).unwrap();
        let b = build_cage(&pts, &opts).unwrap();
        assert_eq!(a.mesh, b.mesh);
        assert_eq!(marching_cubes(&a.filled), marching_cubes(&b.filled));
    }

    #[test]
    fn rest_inverse_basis_is_inverse() {
        let cage = build_cage(
            &sphere_points(2000, 1.0),
            &CageOptions {
                cell_size: Some(0.3),
                ..CageOptions::default()
            },
        )
        .unwrap();
        for t in 0..cage.mesh.tets.len() {
            let b = edge_basis(&cage.mesh.tet_positions(t));
            let err = (cage.mesh.rest_inverse_basis[t] * b - Mat3::identity()).abs().max();
            assert!(err < 1e-6);
        }
    }

    #[test]
    fn rejects_inverted_tets() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()];
        assert!(TetMesh::new(v.clone(), vec![[0, 1, 2, 3]]).is_ok());
        assert!(matches!(
            TetMesh::new(v.clone(), vec![[0, 2, 1, 3]]),
            Err(MeshError::DegenerateTet { index: 0, .. })
        ));
        assert!(matches!(
            TetMesh::new(v, vec![[0, 1, 2, 9]]),
            Err(MeshError::IndexOutOfRange { .. })
        ));
    }
}
