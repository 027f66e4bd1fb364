//! The `.vrgs` interaction script: scene objects, light, camera, solver
//! settings and a timed event list.
//!
//! ```text
//! object "bar" { splats "bar.ply"; dynamic; youngs 1e4; pose t [0 0.5 0]; }
//! light { dir [0 -1 0]; strength 0.35; }
//! sim { dt 1e-4; iters 10; }
//! timeline {
//!   at 0.2 grab "bar" point [0.4 0.5 0] radius 0.05;
//!   at 0.3 drag to [0.4 0.7 0];
//!   at 0.8 release;
//! }
//! ```

mod lexer;
mod parser;
mod printer;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use crate::render::{Camera, Light};
use crate::sim::Material;
use crate::Vec3;

pub use parser::parse;
pub use printer::print;
pub use validate::validate;

/// 1-based line and column (in characters).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Self { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    pub fn new(span: Span, message: impl Into<String>) -> Self {
        Self {
            span,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

/// One lexical or syntax error, or every semantic error found.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ScriptError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for ScriptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motion {
    Static,
    Dynamic,
}

/// Rigid placement applied to an asset on load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub translation: Vec3,
    /// `(w, x, y, z)`; normalized when applied.
    pub rotation: [f64; 4],
}

impl Default for Pose {
    fn default() -> Self {
        Self {
            translation: Vec3::zeros(),
            rotation: [1.0, 0.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectDecl {
    pub name: String,
    /// Asset path, or `synth:<kind>` for a generated asset.
    pub splats: String,
    pub motion: Motion,
    pub material: Material,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LightSpec {
    pub direction: Vec3,
    pub strength: f64,
    pub resolution: u32,
    pub bias: Option<f64>,
}

impl Default for LightSpec {
    fn default() -> Self {
        let l = Light::default();
        Self {
            direction: l.direction,
            strength: l.strength,
            resolution: l.resolution as u32,
            bias: l.bias,
        }
    }
}

impl LightSpec {
    /// The render light; the direction is normalized.
    pub fn to_light(&self) -> Light {
        Light {
            direction: self.direction.try_normalize(0.0).unwrap_or(self.direction),
            resolution: self.resolution as usize,
            bias: self.bias,
            strength: self.strength,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraSpec {
    pub eye: Vec3,
    pub target: Vec3,
    pub up: Vec3,
    /// Vertical field of view, degrees.
    pub fov: f64,
    pub width: u32,
    pub height: u32,
    pub near: f64,
    pub far: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        let c = Camera::default();
        Self {
            eye: c.position,
            target: c.look_at,
            up: c.up,
            fov: c.fov_y.to_degrees(),
            width: c.width as u32,
            height: c.height as u32,
            near: c.near,
            far: c.far,
        }
    }
}

impl CameraSpec {
    pub fn to_camera(&self) -> Camera {
        Camera {
            position: self.eye,
            look_at: self.target,
            up: self.up,
            fov_y: self.fov.to_radians(),
            width: self.width as usize,
            height: self.height as usize,
            near: self.near,
            far: self.far,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    /// Substep length, s.
    pub dt: f64,
    /// Substeps per frame; `None` derives `ceil(1 / (fps · dt))`.
    pub substeps: Option<u32>,
    pub iterations: u32,
    pub k_sigma: f64,
    /// Target cage vertex count range.
    pub cell_band: (u32, u32),
    /// Fixed cage cell size, overriding the band search.
    pub cell_size: Option<f64>,
    pub gravity: Vec3,
    pub fps: f64,
    /// Run length, s; `None` runs until the last event plus one second.
    pub duration: Option<f64>,
    /// Ground plane height; `None` disables the plane.
    pub ground: Option<f64>,
    pub friction: f64,
    /// Inter-body vertex repulsion radius, m; 0 disables it.
    pub repulsion: f64,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            substeps: None,
            iterations: 10,
            k_sigma: 2.0,
            cell_band: (10_000, 30_000),
            cell_size: None,
            gravity: Vec3::new(0.0, -9.8, 0.0),
            fps: 25.0,
            duration: None,
            ground: None,
            friction: 0.5,
            repulsion: 0.0,
        }
    }
}

impl SimSpec {
    pub fn substeps_per_frame(&self) -> u32 {
        self.substeps
            .unwrap_or_else(|| (1.0 / (self.fps * self.dt) - 1e-9).ceil().max(1.0) as u32)
    }
}

/// Material field addressed by `set` events and `SET_PARAM` messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamField {
    Youngs,
    Poisson,
    Density,
    Damping,
}

impl ParamField {
    pub const ALL: [ParamField; 4] = [Self::Youngs, Self::Poisson, Self::Density, Self::Damping];

    pub fn keyword(self) -> &'static str {
        match self {
            Self::Youngs => "youngs",
            Self::Poisson => "poisson",
            Self::Density => "density",
            Self::Damping => "damping",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.keyword() == s)
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }

    pub fn apply(self, m: &mut Material, value: f64) {
        match self {
            Self::Youngs => m.youngs_modulus = value,
            Self::Poisson => m.poisson_ratio = value,
            Self::Density => m.density = value,
            Self::Damping => m.damping = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    Grab {
        object: String,
        point: Vec3,
        radius: f64,
    },
    Drag {
        target: Vec3,
    },
    Release,
    Set {
        object: String,
        field: ParamField,
        value: f64,
    },
    Pin {
        object: String,
        lo: Vec3,
        hi: Vec3,
    },
    /// Drives the vertices inside the box along `path` (time since the event,
    /// offset).
    Kinematic {
        object: String,
        lo: Vec3,
        hi: Vec3,
        path: Vec<(f64, Vec3)>,
    },
    /// Hides an object from rendering and collisions.
    Remove {
        object: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Source positions of parsed items. Always compares equal, so scripts
/// compare by content.
#[derive(Debug, Clone, Default)]
pub struct SourceMap {
    pub objects: Vec<Span>,
    /// Key spans per object.
    pub object_keys: Vec<BTreeMap<&'static str, Span>>,
    pub events: Vec<Span>,
    pub light: BTreeMap<&'static str, Span>,
    pub camera: BTreeMap<&'static str, Span>,
    pub sim: BTreeMap<&'static str, Span>,
}

impl PartialEq for SourceMap {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InteractionScript {
    pub objects: Vec<ObjectDecl>,
    pub light: Option<LightSpec>,
    pub camera: CameraSpec,
    pub sim: SimSpec,
    /// Sorted by time.
    pub timeline: Vec<Event>,
    pub source: SourceMap,
}

impl InteractionScript {
    pub fn object(&self, name: &str) -> Option<(usize, &ObjectDecl)> {
        self.objects.iter().enumerate().find(|(_, o)| o.name == name)
    }

    /// Time of the last event, or 0.
    pub fn last_event_time(&self) -> f64 {
        self.timeline.last().map_or(0.0, |e| e.time)
    }

    pub fn duration(&self) -> f64 {
        self.sim.duration.unwrap_or(self.last_event_time() + 1.0)
    }
}

#[cfg(test)]
mod tests;
