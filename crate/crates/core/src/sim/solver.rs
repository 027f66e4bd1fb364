use rayon::prelude::*;

use super::collision::{find_pairs, project_pair, resolve_static};
use super::color::color_tets;
use super::constraints::{constraint_values, project_tet, TetParams};
use super::{
    inverse_masses, lumped_masses, Attachment, Material, SimConfig, SimError, SimState,
};
use crate::meshgen::TetMesh;
use crate::Vec3;

/// Static solver data: cage topology, per-body materials, and coloring.
#[derive(Debug, Clone)]
pub struct Solver {
    pub cage: TetMesh,
    pub config: SimConfig,
    tet_body: Vec<u32>,
    vertex_body: Vec<u32>,
    materials: Vec<Material>,
    params: Vec<TetParams>,
    colors: Vec<Vec<u32>>,
    scratch: Vec<([Vec3; 4], [f64; 2], bool)>,
}

impl Solver {
    /// One body with one material.
    pub fn new(cage: TetMesh, material: Material, config: SimConfig) -> Result<Self, SimError> {
        let n = cage.tets.len();
        Self::with_bodies(cage, vec![0; n], vec![material], config)
    }

    /// Several bodies concatenated into one cage; `tet_body[t]` indexes
    /// `materials`. Bodies must not share vertices.
    pub fn with_bodies(
        cage: TetMesh,
        tet_body: Vec<u32>,
        materials: Vec<Material>,
        config: SimConfig,
    ) -> Result<Self, SimError> {
        if !(config.dt > 0.0 && config.dt.is_finite()) {
            return Err(SimError::InvalidConfig(format!("dt {} must be > 0", config.dt)));
        }
        if config.iterations == 0 {
            return Err(SimError::InvalidConfig("iterations must be >= 1".into()));
        }
        if tet_body.len() != cage.tets.len() {
            return Err(SimError::InvalidConfig("one body id per tet required".into()));
        }
        if let Some(g) = config.collisions.ground {
            if !(0.0..=1.0).contains(&g.friction) {
                return Err(SimError::InvalidConfig(format!(
                    "friction {} must be in [0, 1]",
                    g.friction
                )));
            }
        }
        for m in &materials {
            m.validate()?;
        }
        let mut vertex_body = vec![0; cage.vertex_count()];
        for (t, tet) in cage.tets.iter().enumerate() {
            let b = tet_body[t];
            if b as usize >= materials.len() {
                return Err(SimError::UnknownBody(b));
            }
            for &v in tet {
                vertex_body[v as usize] = b;
            }
        }
        let colors = color_tets(&cage.tets, cage.vertex_count());
        let widest = colors.iter().map(Vec::len).max().unwrap_or(0);
        let mut s = Self {
            cage,
            config,
            tet_body,
            vertex_body,
            materials,
            params: Vec::new(),
            colors,
            scratch: vec![([Vec3::zeros(); 4], [0.0; 2], true); widest],
        };
        s.rebuild_params()?;
        Ok(s)
    }

    fn rebuild_params(&mut self) -> Result<(), SimError> {
        let lame: Vec<(f64, f64)> = self
            .materials
            .iter()
            .map(Material::lame)
            .collect::<Result<_, _>>()?;
        self.params = (0..self.cage.tets.len())
            .map(|t| {
                let (mu, lambda) = lame[self.tet_body[t] as usize];
                let v = self.cage.rest_volume[t];
                let compliance = |k: f64| if k > 0.0 { 1.0 / (k * v) } else { f64::INFINITY };
                TetParams {
                    inv_basis: self.cage.rest_inverse_basis[t],
                    deviatoric_compliance: compliance(mu),
                    hydrostatic_compliance: compliance(lambda),
                }
            })
            .collect();
        Ok(())
    }

    pub fn material(&self, body: u32) -> Option<&Material> {
        self.materials.get(body as usize)
    }

    pub fn body_count(&self) -> usize {
        self.materials.len()
    }

    pub fn vertex_body(&self) -> &[u32] {
        &self.vertex_body
    }

    pub fn color_count(&self) -> usize {
        self.colors.len()
    }

    fn base_inverse_masses(&self) -> Vec<f64> {
        let m = lumped_masses(&self.cage, |t| {
            self.materials[self.tet_body[t] as usize].density
        });
        inverse_masses(&m)
    }

    /// Rest configuration with lumped masses and zero velocity.
    pub fn initial_state(&self) -> SimState {
        SimState::at_rest(
            self.cage.vertices.clone(),
            self.base_inverse_masses(),
            self.cage.tets.len(),
        )
    }

    /// Replaces a body's material; masses are re-lumped, pins and kinematic
    /// vertices keep inverse mass 0.
    pub fn set_material(
        &mut self,
        state: &mut SimState,
        body: u32,
        material: Material,
    ) -> Result<(), SimError> {
        material.validate()?;
        let slot = self
            .materials
            .get_mut(body as usize)
            .ok_or(SimError::UnknownBody(body))?;
        *slot = material;
        self.rebuild_params()?;
        let base = self.base_inverse_masses();
        let mut fixed = state.pinned.clone();
        for k in &state.kinematic {
            for &v in &k.vertices {
                fixed[v as usize] = true;
            }
        }
        for (i, w) in state.inv_mass.iter_mut().enumerate() {
            if self.vertex_body[i] == body {
                *w = if fixed[i] { 0.0 } else { base[i] };
            }
        }
        Ok(())
    }

    /// Captures every vertex within `radius` of `anchor` (optionally only of
    /// `body`). Returns the attachment handle.
    pub fn attach(
        &self,
        state: &mut SimState,
        body: Option<u32>,
        anchor: Vec3,
        radius: f64,
    ) -> Result<u32, SimError> {
        if !(radius > 0.0) {
            return Err(SimError::InvalidConfig(format!("grab radius {radius} must be > 0")));
        }
        let vertices: Vec<u32> = (0..state.vertex_count() as u32)
            .filter(|&v| body.is_none_or(|b| self.vertex_body[v as usize] == b))
            .filter(|&v| (state.x[v as usize] - anchor).norm() <= radius)
            .collect();
        if vertices.is_empty() {
            return Err(SimError::EmptyGrab {
                anchor: [anchor.x, anchor.y, anchor.z],
                radius,
            });
        }
        let offsets = vertices.iter().map(|&v| state.x[v as usize] - anchor).collect();
        let handle = state.new_handle();
        state.attachments.insert(
            handle,
            Attachment {
                vertices,
                offsets,
                anchor,
            },
        );
        Ok(handle)
    }

    /// Vertices of `body` inside the axis-aligned box `[lo, hi]`.
    pub fn vertices_in_box(&self, state: &SimState, body: Option<u32>, lo: Vec3, hi: Vec3) -> Vec<u32> {
        (0..state.vertex_count() as u32)
            .filter(|&v| body.is_none_or(|b| self.vertex_body[v as usize] == b))
            .filter(|&v| {
                let p = state.x[v as usize];
                (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a])
            })
            .collect()
    }

    /// `sqrt(Σ C_D² + C_H²)` over all tets at positions `x`.
    pub fn constraint_residual(&self, x: &[Vec3]) -> f64 {
        self.cage
            .tets
            .iter()
            .zip(&self.params)
            .map(|(tet, p)| {
                let (cd, ch) = constraint_values(&tet.map(|i| x[i as usize]), &p.inv_basis);
                cd * cd + ch * ch
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Runs `n` substeps.
    pub fn advance(&mut self, state: &mut SimState, n: usize) -> Result<(), SimError> {
        for _ in 0..n {
            self.substep(state)?;
        }
        Ok(())
    }

    /// One XPBD substep. On a non-finite update the state is restored and the
    /// offending constraint reported.
    pub fn substep(&mut self, state: &mut SimState) -> Result<(), SimError> {
        let Solver {
            cage,
            config,
            vertex_body,
            materials,
            params,
            colors,
            scratch,
            ..
        } = self;
        let dt = config.dt;
        let inv_dt2 = 1.0 / (dt * dt);
        let t_new = state.t + dt;
        let saved_x = state.x.clone();
        let saved_v = state.v.clone();

        // Attached vertices act as infinitely heavy during projection.
        let mut w = state.inv_mass.clone();
        for a in state.attachments.values() {
            for &v in &a.vertices {
                w[v as usize] = 0.0;
            }
        }

        state.x_prev.copy_from_slice(&state.x);
        let g = config.gravity;
        for i in 0..state.x.len() {
            if w[i] > 0.0 {
                state.v[i] += g * dt;
                state.x[i] += state.v[i] * dt;
            }
        }
        for k in &state.kinematic {
            let off = k.offset(t_new);
            for (j, &v) in k.vertices.iter().enumerate() {
                state.x[v as usize] = k.base[j] + off;
            }
        }
        for a in state.attachments.values() {
            for (j, &v) in a.vertices.iter().enumerate() {
                state.x[v as usize] = a.anchor + a.offsets[j];
            }
        }
        state.lambda.iter_mut().for_each(|l| *l = [0.0; 2]);

        let env = &config.collisions;
        let radius = env.repulsion_radius;
        let pairs = if radius > 0.0 {
            find_pairs(&state.x, vertex_body, 2.0 * radius)
        } else {
            Vec::new()
        };

        let restore = |state: &mut SimState, kind: &'static str, index: usize| {
            state.x = saved_x.clone();
            state.v = saved_v.clone();
            state.x_prev.copy_from_slice(&saved_x);
            Err(SimError::NonFinite { kind, index })
        };

        let sequential = rayon::current_num_threads() == 1;
        for _ in 0..config.iterations {
            for color in colors.iter() {
                // Tets of one color share no vertices, so the in-place
                // sequential sweep gives the same result as the parallel one.
                if sequential {
                    for &t in color {
                        let t = t as usize;
                        let tet = cage.tets[t];
                        let mut p = tet.map(|i| state.x[i as usize]);
                        let ww = tet.map(|i| w[i as usize]);
                        if !project_tet(&mut p, &ww, &params[t], inv_dt2, &mut state.lambda[t]) {
                            return restore(state, "tet", t);
                        }
                        for (j, &v) in tet.iter().enumerate() {
                            state.x[v as usize] = p[j];
                        }
                    }
                    continue;
                }
                let x = &state.x;
                let lambda = &state.lambda;
                let tets = &cage.tets;
                let params = &*params;
                let w = &w;
                scratch[..color.len()]
                    .par_iter_mut()
                    .zip(color.par_iter())
                    .with_min_len(128)
                    .for_each(|(slot, &t)| {
                        let t = t as usize;
                        let tet = tets[t];
                        let mut p = tet.map(|i| x[i as usize]);
                        let ww = tet.map(|i| w[i as usize]);
                        let mut l = lambda[t];
                        let ok = project_tet(&mut p, &ww, &params[t], inv_dt2, &mut l);
                        *slot = (p, l, ok);
                    });
                for (slot, &t) in scratch[..color.len()].iter().zip(color) {
                    let t = t as usize;
                    if !slot.2 {
                        return restore(state, "tet", t);
                    }
                    for (j, &v) in cage.tets[t].iter().enumerate() {
                        state.x[v as usize] = slot.0[j];
                    }
                    state.lambda[t] = slot.1;
                }
            }
            for &(i, j) in &pairs {
                let (i, j) = (i as usize, j as usize);
                let (mut a, mut b) = (state.x[i], state.x[j]);
                project_pair(&mut a, &mut b, w[i], w[j], radius);
                state.x[i] = a;
                state.x[j] = b;
            }
            for i in 0..state.x.len() {
                if w[i] > 0.0 {
                    let prev = state.x_prev[i];
                    resolve_static(env, &mut state.x[i], &prev, false);
                }
            }
        }
        for i in 0..state.x.len() {
            if w[i] > 0.0 {
                let prev = state.x_prev[i];
                resolve_static(env, &mut state.x[i], &prev, true);
            }
        }

        for i in 0..state.x.len() {
            let damping = materials[vertex_body[i] as usize].damping;
            let v = (state.x[i] - state.x_prev[i]) / dt;
            state.v[i] = v * (1.0 - damping * dt).max(0.0);
        }
        if let Some(bad) = state
            .x
            .iter()
            .zip(&state.v)
            .position(|(x, v)| !(x.iter().chain(v.iter()).all(|c| c.is_finite())))
        {
            return restore(state, "collision", bad);
        }
        state.t = t_new;
        state.substeps += 1;
        Ok(())
    }
}
