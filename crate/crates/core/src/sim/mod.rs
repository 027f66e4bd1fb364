//! XPBD soft-body solver for the tetrahedral cage.
//!
//! Each tet carries a split Neo-Hookean constraint pair: deviatoric
//! `‖F‖_F − √3` with compliance `1/(μ_L·V)` and hydrostatic `det F − 1` with
//! compliance `1/(λ_L·V)`. Tets are graph-colored so every color is projected
//! in parallel while colors run in sequence (Gauss–Seidel across colors).

mod collision;
mod color;
mod constraints;
mod solver;

use std::collections::BTreeMap;

use thiserror::Error;

pub use collision::{find_pairs, project_pair, resolve_static, CollisionEnv, Ground, StaticSdf};
pub use color::color_tets;
pub use constraints::{constraint_values, project_tet, TetParams};
pub use solver::Solver;

use crate::meshgen::TetMesh;
use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("poisson ratio {0} reaches the incompressible limit 0.5")]
    Incompressible(f64),
    #[error("non-finite update in {kind} constraint {index}")]
    NonFinite { kind: &'static str, index: usize },
    #[error("empty grab: no cage vertex within {radius} of {anchor:?}")]
    EmptyGrab { anchor: [f64; 3], radius: f64 },
    #[error("unknown attachment {0}")]
    UnknownAttachment(u32),
    #[error("unknown body {0}")]
    UnknownBody(u32),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Elastic material of one body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    /// Pa.
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// kg/m³.
    pub density: f64,
    /// Velocity decay rate, 1/s.
    pub damping: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            youngs_modulus: 1000.0,
            poisson_ratio: 0.3,
            density: 1000.0,
            damping: 2.0,
        }
    }
}

impl Material {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidMaterial(m));
        if !(self.youngs_modulus > 0.0 && self.youngs_modulus.is_finite()) {
            return bad(format!("youngs modulus {} must be > 0", self.youngs_modulus));
        }
        if !(0.0..0.5).contains(&self.poisson_ratio) {
            return bad(format!("poisson ratio {} must be in [0, 0.5)", self.poisson_ratio));
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return bad(format!("density {} must be > 0", self.density));
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return bad(format!("damping {} must be >= 0", self.damping));
        }
        Ok(())
    }

    pub fn lame(&self) -> Result<(f64, f64), SimError> {
        lame_parameters(self.youngs_modulus, self.poisson_ratio)
    }
}

/// `(μ_L, λ_L)` from Young's modulus and Poisson ratio.
pub fn lame_parameters(e: f64, nu: f64) -> Result<(f64, f64), SimError> {
    if nu >= 0.5 {
        return Err(SimError::Incompressible(nu));
    }
    let mu = e / (2.0 * (1.0 + nu));
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    Ok((mu, lambda))
}

/// Lumped vertex masses: each tet gives `ρ·V/4` to each of its vertices.
pub fn lumped_masses(cage: &TetMesh, density: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut m = vec![0.0; cage.vertex_count()];
    for (t, tet) in cage.tets.iter().enumerate() {
        let share = density(t) * cage.rest_volume[t] / 4.0;
        for &v in tet {
            m[v as usize] += share;
        }
    }
    m
}

/// Inverse lumped masses. Vertices not referenced by any tet get unit mass.
pub fn assemble_masses(cage: &TetMesh, density: f64) -> Vec<f64> {
    inverse_masses(&lumped_masses(cage, |_| density))
}

pub(crate) fn inverse_masses(m: &[f64]) -> Vec<f64> {
    m.iter().map(|&m| if m > 0.0 { 1.0 / m } else { 1.0 }).collect()
}

/// Global solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Substep length, s.
    pub dt: f64,
    pub iterations: usize,
    pub gravity: Vec3,
    pub collisions: CollisionEnv,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            iterations: 10,
            gravity: Vec3::new(0.0, -9.8, 0.0),
            collisions: CollisionEnv::default(),
        }
    }
}

/// Hard target-position constraint on a set of vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Attachment {
    pub vertices: Vec<u32>,
    /// Vertex position minus anchor at grab time.
    pub offsets: Vec<Vec3>,
    pub anchor: Vec3,
}

/// Vertices driven along a piecewise-linear offset path.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicRegion {
    pub vertices: Vec<u32>,
    pub base: Vec<Vec3>,
    /// `(time since start, offset)`, time-sorted.
    pub path: Vec<(f64, Vec3)>,
    pub start: f64,
}

impl KinematicRegion {
    pub fn offset(&self, t: f64) -> Vec3 {
        let s = t - self.start;
        let Some(first) = self.path.first() else {
            return Vec3::zeros();
        };
        if s <= first.0 {
            return first.1;
        }
        for w in self.path.windows(2) {
            let ((t0, a), (t1, b)) = (w[0], w[1]);
            if s <= t1 {
                let u = if t1 > t0 { (s - t0) / (t1 - t0) } else { 1.0 };
                return a + (b - a) * u;
            }
        }
        self.path.last().unwrap().1
    }
}

/// Mutable solver state, owned by one simulation thread.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub x: Vec<Vec3>,
    pub x_prev: Vec<Vec3>,
    pub v: Vec<Vec3>,
    /// 0 for pinned and kinematic vertices.
    pub inv_mass: Vec<f64>,
    /// Per-tet `[deviatoric, hydrostatic]` multipliers of the current substep.
    pub lambda: Vec<[f64; 2]>,
    pub attachments: BTreeMap<u32, Attachment>,
    pub kinematic: Vec<KinematicRegion>,
    pub pinned: Vec<bool>,
    pub t: f64,
    pub substeps: u64,
    next_handle: u32,
}

impl SimState {
    pub fn vertex_count(&self) -> usize {
        self.x.len()
    }

    /// State at rest with the given inverse masses.
    pub fn at_rest(x: Vec<Vec3>, inv_mass: Vec<f64>, tets: usize) -> Self {
        let n = x.len();
        Self {
            x_prev: x.clone(),
            x,
            v: vec![Vec3::zeros(); n],
            inv_mass,
            lambda: vec![[0.0; 2]; tets],
            attachments: BTreeMap::new(),
            kinematic: Vec::new(),
            pinned: vec![false; n],
            t: 0.0,
            substeps: 0,
            next_handle: 0,
        }
    }

    /// `Σ m·v` over vertices with finite mass.
    pub fn momentum(&self) -> Vec3 {
        self.x
            .iter()
            .enumerate()
            .filter(|&(i, _)| self.inv_mass[i] > 0.0)
            .map(|(i, _)| self.v[i] / self.inv_mass[i])
            .sum()
    }

    pub fn kinetic_energy(&self) -> f64 {
        (0..self.x.len())
            .filter(|&i| self.inv_mass[i] > 0.0)
            .map(|i| 0.5 * self.v[i].norm_squared() / self.inv_mass[i])
            .sum()
    }

    /// Sets inverse mass 0 on `vertices` permanently.
    pub fn pin(&mut self, vertices: &[u32]) {
        for &v in vertices {
            self.pinned[v as usize] = true;
            self.inv_mass[v as usize] = 0.0;
            self.v[v as usize] = Vec3::zeros();
        }
    }

    /// Drives `vertices` along `path` (offsets relative to their current
    /// positions, times relative to now).
    pub fn add_kinematic(&mut self, vertices: Vec<u32>, path: Vec<(f64, Vec3)>) {
        for &v in &vertices {
            self.inv_mass[v as usize] = 0.0;
        }
        let base = vertices.iter().map(|&v| self.x[v as usize]).collect();
        self.kinematic.push(KinematicRegion {
            vertices,
            base,
            path,
            start: self.t,
        });
    }

    pub fn attachment(&self, handle: u32) -> Option<&Attachment> {
        self.attachments.get(&handle)
    }

    /// Moves an attachment anchor; captured vertices follow rigidly.
    pub fn drag(&mut self, handle: u32, anchor: Vec3) -> Result<(), SimError> {
        let a = self
            .attachments
            .get_mut(&handle)
            .ok_or(SimError::UnknownAttachment(handle))?;
        a.anchor = anchor;
        Ok(())
    }

    pub fn release(&mut self, handle: u32) -> Result<(), SimError> {
        self.attachments
            .remove(&handle)
            .map(|_| ())
            .ok_or(SimError::UnknownAttachment(handle))
    }

    fn new_handle(&mut self) -> u32 {
        let h = self.next_handle;
        self.next_handle += 1;
        h
    }
}
