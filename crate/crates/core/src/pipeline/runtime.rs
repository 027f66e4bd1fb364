use nalgebra::{Rotation3, SymmetricEigen, UnitQuaternion};

use super::Scene;
use crate::embedding::{deform_into, DeformOptions, DeformedSplats};
use crate::render::{render, Camera, Image, Light};
use crate::script::{Event, EventKind, InteractionScript, Motion, ParamField, SimSpec};
use crate::sim::{SimError, SimState, Solver};
use crate::splat::SplatScene;
use crate::{Result, Vec3};

/// A scripted drag moves the anchor linearly from `from` to `to` over
/// `[t0, t1]`.
#[derive(Debug, Clone, Copy)]
struct DragPath {
    t0: f64,
    t1: f64,
    from: Vec3,
    to: Vec3,
}

impl DragPath {
    fn at(&self, t: f64) -> Vec3 {
        let u = if self.t1 > self.t0 {
            ((t - self.t0) / (self.t1 - self.t0)).clamp(0.0, 1.0)
        } else {
            1.0
        };
        self.from + (self.to - self.from) * u
    }
}

#[derive(Debug, Clone)]
struct ScriptedGrab {
    handle: u32,
    drag: Option<DragPath>,
}

/// A running scene: solver state, timeline cursor and the current deformed
/// kernels.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub scene: Scene,
    pub sim: SimSpec,
    pub timeline: Vec<Event>,
    pub solver: Solver,
    pub state: SimState,
    /// Transforms of every kernel; static kernels never change.
    pub deformed: DeformedSplats,
    rows: DeformedSplats,
    /// Copy of the kernels with removed objects at zero opacity.
    visible: SplatScene,
    removed: Vec<bool>,
    cursor: usize,
    duration: f64,
    scripted: Option<ScriptedGrab>,
    tracked: Vec<u32>,
    pub frame: u64,
}

impl Simulation {
    /// Starts at rest and applies the events due at time 0.
    pub fn new(scene: Scene, script: &InteractionScript) -> Result<Self> {
        let solver = scene.solver(&script.sim)?;
        let state = solver.initial_state();
        let n = scene.objects.len();
        let mut s = Self {
            deformed: DeformedSplats::from_scene(&scene.splats),
            rows: DeformedSplats::rest(&scene.table),
            visible: scene.splats.clone(),
            scene,
            sim: script.sim.clone(),
            timeline: script.timeline.clone(),
            solver,
            state,
            removed: vec![false; n],
            cursor: 0,
            duration: script.duration(),
            scripted: None,
            tracked: Vec::new(),
            frame: 0,
        };
        s.apply_due_events()?;
        s.update_splats()?;
        Ok(s)
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn is_removed(&self, object: usize) -> bool {
        self.removed[object]
    }

    /// Kernels as rendered: removed objects have zero opacity.
    pub fn visible(&self) -> &SplatScene {
        &self.visible
    }

    fn apply_due_events(&mut self) -> Result<()> {
        let due = self.state.t + 0.5 * self.sim.dt;
        while self.cursor < self.timeline.len() && self.timeline[self.cursor].time <= due {
            let e = self.timeline[self.cursor].clone();
            self.apply_event(&e)?;
            self.cursor += 1;
        }
        if let Some(g) = &self.scripted {
            if let Some(d) = g.drag {
                self.state.drag(g.handle, d.at(self.state.t))?;
            }
        }
        Ok(())
    }

    fn body_of(&self, name: &str) -> Result<(usize, u32)> {
        let i = self
            .scene
            .object_index(name)
            .ok_or_else(|| SimError::InvalidConfig(format!("unknown object {name:?}")))?;
        let body = self.scene.objects[i]
            .body
            .ok_or_else(|| SimError::InvalidConfig(format!("object {name:?} is static")))?;
        Ok((i, body))
    }

    fn apply_event(&mut self, e: &Event) -> Result<()> {
        log::debug!("t={:.4}: {:?}", self.state.t, e.kind);
        match &e.kind {
            EventKind::Grab {
                object,
                point,
                radius,
            } => {
                let (i, _) = self.body_of(object)?;
                let handle = self.grab(i, *point, *radius)?;
                self.scripted = Some(ScriptedGrab { handle, drag: None });
            }
            EventKind::Drag { target } => {
                let Some(g) = &mut self.scripted else {
                    return Ok(());
                };
                let from = self.state.attachment(g.handle).map_or(*target, |a| a.anchor);
                let t1 = self
                    .timeline
                    .get(self.cursor + 1)
                    .map_or(self.duration, |n| n.time);
                g.drag = Some(DragPath {
                    t0: e.time,
                    t1,
                    from,
                    to: *target,
                });
            }
            EventKind::Release => {
                if let Some(g) = self.scripted.take() {
                    self.state.release(g.handle)?;
                }
            }
            EventKind::Set {
                object,
                field,
                value,
            } => {
                let (i, _) = self.body_of(object)?;
                self.set_param(i, *field, *value)?;
            }
            EventKind::Pin { object, lo, hi } => {
                let (_, body) = self.body_of(object)?;
                let v = self.solver.vertices_in_box(&self.state, Some(body), *lo, *hi);
                if v.is_empty() {
                    log::warn!("pin on {object:?} captured no vertices");
                }
                self.state.pin(&v);
            }
            EventKind::Kinematic {
                object,
                lo,
                hi,
                path,
            } => {
                let (_, body) = self.body_of(object)?;
                let v = self.solver.vertices_in_box(&self.state, Some(body), *lo, *hi);
                if v.is_empty() {
                    log::warn!("kinematic region on {object:?} captured no vertices");
                }
                self.state.add_kinematic(v, path.clone());
            }
            EventKind::Remove { object } => {
                let i = self
                    .scene
                    .object_index(object)
                    .ok_or_else(|| SimError::InvalidConfig(format!("unknown object {object:?}")))?;
                self.remove(i)?;
            }
        }
        Ok(())
    }

    /// Captures the cage vertices of `object` within `radius` of `point`.
    /// The kernels near the point become the tracked set.
    pub fn grab(&mut self, object: usize, point: Vec3, radius: f64) -> Result<u32> {
        let o = self
            .scene
            .objects
            .get(object)
            .ok_or(SimError::UnknownBody(object as u32))?;
        let body = o.body.ok_or(SimError::UnknownBody(object as u32))?;
        let handle = self.solver.attach(&mut self.state, Some(body), point, radius)?;
        let range = o.splats.clone();
        let near: Vec<u32> = range
            .clone()
            .filter(|&s| (self.deformed.means[s] - point).norm() <= radius)
            .map(|s| s as u32)
            .collect();
        self.tracked = if near.is_empty() {
            range.map(|s| s as u32).collect()
        } else {
            near
        };
        Ok(handle)
    }

    pub fn drag(&mut self, handle: u32, target: Vec3) -> Result<()> {
        Ok(self.state.drag(handle, target)?)
    }

    pub fn release(&mut self, handle: u32) -> Result<()> {
        if self.scripted.as_ref().is_some_and(|g| g.handle == handle) {
            self.scripted = None;
        }
        Ok(self.state.release(handle)?)
    }

    pub fn set_param(&mut self, object: usize, field: ParamField, value: f64) -> Result<()> {
        let body = self
            .scene
            .objects
            .get(object)
            .and_then(|o| o.body)
            .ok_or(SimError::UnknownBody(object as u32))?;
        let mut m = *self.solver.material(body).ok_or(SimError::UnknownBody(body))?;
        field.apply(&mut m, value);
        self.solver.set_material(&mut self.state, body, m)?;
        Ok(())
    }

    /// Hides an object. A removed dynamic object is frozen in place; a
    /// removed static object stops colliding.
    pub fn remove(&mut self, object: usize) -> Result<()> {
        if self.removed[object] {
            return Ok(());
        }
        self.removed[object] = true;
        let o = self.scene.objects[object].clone();
        for s in &mut self.visible.splats[o.splats.clone()] {
            s.opacity_logit = f32::NEG_INFINITY;
        }
        match o.motion {
            Motion::Dynamic => {
                let v: Vec<u32> = o.vertices.map(|v| v as u32).collect();
                self.state.pin(&v);
            }
            Motion::Static => {
                self.solver.config.collisions.sdf = self.scene.static_sdf(&self.removed)?;
            }
        }
        Ok(())
    }

    /// Runs `n` substeps, applying timeline events at substep boundaries.
    pub fn step(&mut self, n: usize) -> Result<()> {
        for _ in 0..n {
            self.apply_due_events()?;
            self.solver.substep(&mut self.state)?;
        }
        self.apply_due_events()
    }

    /// Advances one output frame and refreshes the deformed kernels.
    pub fn step_frame(&mut self) -> Result<()> {
        self.step(self.sim.substeps_per_frame() as usize)?;
        self.update_splats()?;
        self.frame += 1;
        Ok(())
    }

    /// Pushes the current cage positions through the embedding.
    pub fn update_splats(&mut self) -> Result<()> {
        deform_into(
            &self.scene.table,
            &self.scene.cage,
            &self.state.x,
            DeformOptions::default(),
            &mut self.rows,
        )?;
        for (r, &s) in self.scene.row_splat.iter().enumerate() {
            let s = s as usize;
            self.deformed.means[s] = self.rows.means[r];
            self.deformed.covariances[s] = self.rows.covariances[r];
            self.deformed.rotations[s] = self.rows.rotations[r];
            self.deformed.gradients[s] = self.rows.gradients[r];
            self.deformed.degenerate[s] = self.rows.degenerate[r];
        }
        Ok(())
    }

    pub fn render(&self, camera: &Camera, light: Option<&Light>) -> Result<Image> {
        Ok(render(&self.deformed, &self.visible, camera, light)?)
    }

    /// Mean position of the kernels captured by the last grab.
    pub fn tracked_mean(&self) -> Option<Vec3> {
        if self.tracked.is_empty() {
            return None;
        }
        let sum: Vec3 = self.tracked.iter().map(|&s| self.deformed.means[s as usize]).sum();
        Some(sum / self.tracked.len() as f64)
    }

    pub fn object_centroid(&self, object: usize) -> Vec3 {
        let r = self.scene.objects[object].splats.clone();
        let n = r.len().max(1) as f64;
        self.deformed.means[r].iter().sum::<Vec3>() / n
    }

    /// Cage positions as sent in `FRAME` messages.
    pub fn frame_positions(&self) -> Vec<[f32; 3]> {
        self.state.x.iter().map(|v| [v.x as f32, v.y as f32, v.z as f32]).collect()
    }
}

/// Stores deformed transforms back as kernels, factoring each covariance
/// into rotation and scale. SH coefficients are kept as they are.
pub fn deformed_scene(rest: &SplatScene, deformed: &DeformedSplats) -> SplatScene {
    let mut out = rest.clone();
    for (i, s) in out.splats.iter_mut().enumerate() {
        let m = deformed.means[i];
        s.mean = [m.x as f32, m.y as f32, m.z as f32];
        let eig = SymmetricEigen::new(deformed.covariances[i]);
        let mut r = eig.eigenvectors;
        if r.determinant() < 0.0 {
            r.column_mut(2).neg_mut();
        }
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
        s.rotation = [q.w as f32, q.i as f32, q.j as f32, q.k as f32];
        s.log_scale = std::array::from_fn(|a| (0.5 * eig.eigenvalues[a].max(1e-30).ln()) as f32);
    }
    out
}
