//! Two-level embedding of Gaussian kernels in the simulation cage.
//!
//! Each splat gets a private local tetrahedron circumscribing its k·σ
//! ellipsoid. The four local vertices are bound barycentrically to the cage,
//! so the splat follows the deformation gradient of its local tet, which
//! averages the cage motion over the kernel's footprint instead of sampling a
//! single cage tet at the mean.

mod emb1;
mod locate;

use rayon::prelude::*;
use thiserror::Error;

pub use emb1::{encoded_len as emb1_len, MAGIC as EMB1_MAGIC};
pub use locate::{TetLocator, CONTAINMENT_EPS};

use crate::math::{edge_basis, polar_rotation, symmetrize, tet_signed_volume};
use crate::meshgen::TetMesh;
use crate::splat::{GaussianSplat, SplatScene};
use crate::{Mat3, Vec3};

/// Default sigma multiplier for the local tet.
pub const DEFAULT_K_SIGMA: f64 = 2.0;

#[derive(Debug, Error, PartialEq)]
pub enum EmbeddingError {
    #[error("degenerate rest tetrahedron (det {det:e})")]
    SingularRest { det: f64 },
    #[error("splat {splat} mean lies outside every cage tet")]
    MeanOutsideCage { splat: usize },
    #[error("sigma multiplier must be positive, got {0}")]
    InvalidK(f64),
    #[error("expected {expected} {what}, got {got}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("EMB1: {0}")]
    Format(String),
}

/// `F = Ds · Dm⁻¹` with `D = [x₁ − x₀, x₂ − x₀, x₃ − x₀]`.
pub fn deformation_gradient(rest: &[Vec3; 4], current: &[Vec3; 4]) -> Result<Mat3, EmbeddingError> {
    let dm = edge_basis(rest);
    let det = dm.determinant();
    let scale = (1..4).map(|i| (rest[i] - rest[0]).norm()).fold(0.0, f64::max);
    if !(det.abs() > 1e-12 * scale.powi(3)) {
        return Err(EmbeddingError::SingularRest { det });
    }
    let inv = dm.try_inverse().ok_or(EmbeddingError::SingularRest { det })?;
    Ok(edge_basis(current) * inv)
}

/// Regular tetrahedron with insphere radius 1 centered at the origin,
/// positively oriented.
pub fn reference_tet() -> [Vec3; 4] {
    let s = 3f64.sqrt();
    [
        Vec3::new(1.0, 1.0, 1.0) * s,
        Vec3::new(1.0, -1.0, -1.0) * s,
        Vec3::new(-1.0, -1.0, 1.0) * s,
        Vec3::new(-1.0, 1.0, -1.0) * s,
    ]
}

/// A splat's private rest tetrahedron.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTet {
    pub rest_vertices: [Vec3; 4],
    pub rest_barycentric_of_mean: [f64; 4],
    /// `Dm⁻¹` of `rest_vertices`.
    pub rest_inverse_basis: Mat3,
}

impl LocalTet {
    pub fn from_parts(rest_vertices: [Vec3; 4], weights: [f64; 4]) -> Result<Self, EmbeddingError> {
        let dm = edge_basis(&rest_vertices);
        let det = dm.determinant();
        let inv = match dm.try_inverse() {
            Some(inv) if det > 0.0 && inv.iter().all(|v| v.is_finite()) => inv,
            _ => return Err(EmbeddingError::SingularRest { det }),
        };
        Ok(Self {
            rest_vertices,
            rest_barycentric_of_mean: weights,
            rest_inverse_basis: inv,
        })
    }

    pub fn volume(&self) -> f64 {
        let v = &self.rest_vertices;
        tet_signed_volume(&v[0], &v[1], &v[2], &v[3])
    }
}

/// Maps the reference tet by `v ↦ μ + k·R·diag(exp(log_scale))·v`, so the
/// k·σ ellipsoid is exactly the tet's insphere image.
pub fn build_local_tet(splat: &GaussianSplat, k: f64) -> Result<LocalTet, EmbeddingError> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(EmbeddingError::InvalidK(k));
    }
    let mu = splat.mean();
    let r = splat.rotation().to_rotation_matrix().into_inner();
    let a = r * Mat3::from_diagonal(&(splat.scale() * k));
    let verts = reference_tet().map(|v| mu + a * v);
    LocalTet::from_parts(verts, [0.25; 4])
}

/// Barycentric binding of one local-tet vertex to a cage tet.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VertexBinding {
    pub tet: u32,
    pub weights: [f64; 4],
    /// The vertex lies outside the cage; `weights` are extrapolated.
    pub flagged: bool,
}

/// Per-splat local tets, their cage bindings, and rest covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub local: Vec<LocalTet>,
    pub bindings: Vec<[VertexBinding; 4]>,
    pub sigma0: Vec<Mat3>,
    pub cage_tets: usize,
}

impl EmbeddingTable {
    pub fn len(&self) -> usize {
        self.local.len()
    }

    pub fn is_empty(&self) -> bool {
        self.local.is_empty()
    }

    pub fn flagged_vertices(&self) -> usize {
        self.bindings.iter().flatten().filter(|b| b.flagged).count()
    }

    /// Local vertex `j` of splat `s` reconstructed from its binding.
    pub fn local_vertex(&self, cage: &TetMesh, positions: &[Vec3], s: usize, j: usize) -> Vec3 {
        let b = &self.bindings[s][j];
        let t = cage.tets[b.tet as usize];
        (0..4).map(|i| positions[t[i] as usize] * b.weights[i]).sum()
    }
}

/// Builds the two-level embedding of every splat in `scene`.
pub fn build_embedding(
    scene: &SplatScene,
    cage: &TetMesh,
    k: f64,
) -> Result<EmbeddingTable, EmbeddingError> {
    let locator = TetLocator::new(cage);
    let per_splat: Vec<Result<(LocalTet, [VertexBinding; 4], Mat3), EmbeddingError>> = scene
        .splats
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            if locator.locate(&s.mean()).is_none() {
                return Err(EmbeddingError::MeanOutsideCage { splat: i });
            }
            let local = build_local_tet(s, k)?;
            let bind = local.rest_vertices.map(|v| match locator.locate(&v) {
                Some((t, w)) => VertexBinding {
                    tet: t as u32,
                    weights: w,
                    flagged: false,
                },
                None => {
                    let (t, w) = locator.nearest(&v).expect("cage has tets");
                    VertexBinding {
                        tet: t as u32,
                        weights: w,
                        flagged: true,
                    }
                }
            });
            Ok((local, bind, s.covariance()))
        })
        .collect();
    let mut table = EmbeddingTable {
        local: Vec::with_capacity(scene.len()),
        bindings: Vec::with_capacity(scene.len()),
        sigma0: Vec::with_capacity(scene.len()),
        cage_tets: cage.tets.len(),
    };
    for r in per_splat {
        let (l, b, c) = r?;
        table.local.push(l);
        table.bindings.push(b);
        table.sigma0.push(c);
    }
    let flagged = table.flagged_vertices();
    if flagged > 0 {
        log::info!("{flagged} local-tet vertices bound by extrapolation");
    }
    Ok(table)
}

/// Deformed splat transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformedSplats {
    pub means: Vec<Vec3>,
    pub covariances: Vec<Mat3>,
    /// Rotation applied to SH view directions (identity when disabled).
    pub rotations: Vec<Mat3>,
    /// Local deformation gradients.
    pub gradients: Vec<Mat3>,
    /// Splats whose local tet is inverted this frame.
    pub degenerate: Vec<bool>,
}

impl DeformedSplats {
    /// The undeformed state of `table`.
    pub fn rest(table: &EmbeddingTable) -> Self {
        let n = table.len();
        Self {
            means: table
                .local
                .iter()
                .map(|l| {
                    (0..4)
                        .map(|i| l.rest_vertices[i] * l.rest_barycentric_of_mean[i])
                        .sum()
                })
                .collect(),
            covariances: table.sigma0.clone(),
            rotations: vec![Mat3::identity(); n],
            gradients: vec![Mat3::identity(); n],
            degenerate: vec![false; n],
        }
    }

    /// Transforms read straight from the stored kernels, with no cage.
    pub fn from_scene(scene: &SplatScene) -> Self {
        let n = scene.len();
        Self {
            means: scene.means(),
            covariances: scene.splats.iter().map(GaussianSplat::covariance).collect(),
            rotations: vec![Mat3::identity(); n],
            gradients: vec![Mat3::identity(); n],
            degenerate: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformOptions {
    /// Reorient SH evaluation by the polar rotation of the local gradient.
    pub sh_rotation: bool,
}

impl Default for DeformOptions {
    fn default() -> Self {
        Self { sh_rotation: true }
    }
}

/// Pushes means and covariances through the cage deformation.
pub fn deform_splats(
    table: &EmbeddingTable,
    rest: &SplatScene,
    cage: &TetMesh,
    positions: &[Vec3],
) -> Result<DeformedSplats, EmbeddingError> {
    if rest.len() != table.len() {
        return Err(EmbeddingError::CountMismatch {
            what: "splats",
            expected: table.len(),
            got: rest.len(),
        });
    }
    let mut out = DeformedSplats::rest(table);
    deform_into(table, cage, positions, DeformOptions::default(), &mut out)?;
    Ok(out)
}

/// In-place variant of [`deform_splats`]. Inverted splats keep the covariance
/// and rotation already in `out`.
pub fn deform_into(
    table: &EmbeddingTable,
    cage: &TetMesh,
    positions: &[Vec3],
    options: DeformOptions,
    out: &mut DeformedSplats,
) -> Result<(), EmbeddingError> {
    if positions.len() != cage.vertex_count() {
        return Err(EmbeddingError::CountMismatch {
            what: "cage positions",
            expected: cage.vertex_count(),
            got: positions.len(),
        });
    }
    if table.cage_tets != cage.tets.len() {
        return Err(EmbeddingError::CountMismatch {
            what: "cage tets",
            expected: table.cage_tets,
            got: cage.tets.len(),
        });
    }
    if out.len() != table.len() {
        *out = DeformedSplats::rest(table);
    }
    let DeformedSplats {
        means,
        covariances,
        rotations,
        gradients,
        degenerate,
    } = out;
    (
        means,
        covariances,
        rotations,
        gradients,
        degenerate.as_mut_slice(),
    )
        .into_par_iter()
        .enumerate()
        .for_each(|(s, (mu, cov, rot, grad, degen))| {
            let local = &table.local[s];
            let v: [Vec3; 4] = std::array::from_fn(|j| table.local_vertex(cage, positions, s, j));
            *mu = (0..4)
                .map(|i| v[i] * local.rest_barycentric_of_mean[i])
                .sum();
            let f = edge_basis(&v) * local.rest_inverse_basis;
            *grad = f;
            let det = f.determinant();
            if det > 0.0 && det.is_finite() {
                *cov = symmetrize(&(f * table.sigma0[s] * f.transpose()));
                *rot = if options.sh_rotation {
                    polar_rotation(&f)
                } else {
                    Mat3::identity()
                };
                *degen = false;
            } else {
                *degen = true;
            }
        });
    Ok(())
}

/// Naive single-level embedding: each splat takes the gradient of the cage
/// tet containing its mean.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveEmbedding {
    pub tet: Vec<u32>,
    pub weights: Vec<[f64; 4]>,
}

pub fn build_naive_embedding(
    scene: &SplatScene,
    cage: &TetMesh,
) -> Result<NaiveEmbedding, EmbeddingError> {
    let locator = TetLocator::new(cage);
    let found: Vec<_> = scene
        .splats
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            locator
                .locate(&s.mean())
                .ok_or(EmbeddingError::MeanOutsideCage { splat: i })
        })
        .collect();
    let mut out = NaiveEmbedding {
        tet: Vec::with_capacity(found.len()),
        weights: Vec::with_capacity(found.len()),
    };
    for r in found {
        let (t, w) = r?;
        out.tet.push(t as u32);
        out.weights.push(w);
    }
    Ok(out)
}

impl NaiveEmbedding {
    /// Per-splat deformation gradient of the owning cage tet.
    pub fn gradients(&self, cage: &TetMesh, positions: &[Vec3]) -> Vec<Mat3> {
        self.tet
            .par_iter()
            .map(|&t| {
                let t = t as usize;
                let x = cage.tets[t].map(|i| positions[i as usize]);
                edge_basis(&x) * cage.rest_inverse_basis[t]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests;
