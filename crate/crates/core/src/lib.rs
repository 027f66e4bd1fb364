//! Deformable Gaussian splatting.
//!
//! Gaussian kernels are bound to a private local tetrahedron whose corners are
//! in turn embedded barycentrically in a tetrahedral simulation cage. The cage
//! is advanced by an XPBD soft-body solver with Neo-Hookean strain constraints,
//! and the deformed kernels are rasterized with front-to-back alpha blending
//! and a splat shadow map.
//!
//! The crate is organised bottom-up:
//!
//! - [`splat`]: kernel data model, PLY interchange, covariance and SH math.
//! - [`meshgen`]: voxelization, interior filling, marching cubes, BCC tets.
//! - [`embedding`]: two-level embedding and covariance push-forward.
//! - [`sim`]: XPBD solver, collisions and attachments.
//! - [`render`]: CPU splat rasterizer and shadow map.
//! - [`script`]: the `.vrgs` interaction script language.
//! - [`protocol`]: binary wire frames shared with the viewer.
//! - [`pipeline`]: scene assembly and the headless runner.

pub mod embedding;
pub mod error;
pub mod math;
pub mod meshgen;
pub mod pipeline;
pub mod protocol;
pub mod render;
pub mod script;
pub mod sim;
pub mod splat;
pub mod synth;

pub use embedding::{
    build_embedding, build_local_tet, deform_splats, deformation_gradient, DeformedSplats,
    EmbeddingTable, LocalTet,
};
pub use error::{Error, Result};
pub use meshgen::{TetMesh, TriMesh, VoxelGrid};
pub use render::{Camera, Image, Light};
pub use script::InteractionScript;
pub use sim::{Material, SimState, Solver};
pub use splat::{GaussianSplat, SplatScene};

pub use nalgebra::{Matrix3, UnitQuaternion, Vector3};

/// Position / direction type used throughout the crate.
pub type Vec3 = Vector3<f64>;
/// 3×3 matrix type used throughout the crate.
pub type Mat3 = Matrix3<f64>;
