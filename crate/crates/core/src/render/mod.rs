//! CPU splat rasterizer with a splat shadow map.
//!
//! Kernels are projected with the EWA approximation `Σ₂D = J W Σ Wᵀ Jᵀ`,
//! sorted once per frame by view depth, and alpha-blended front to back.
//! Pixel centres sit at half-integer coordinates and the image `y` axis
//! points down.

mod image;
mod raster;
mod shadow;

use nalgebra::{Matrix2, Matrix2x3, Vector2};
use thiserror::Error;

pub use self::image::Image;
pub use raster::{ALPHA_MIN, TRANSMITTANCE_MIN};
pub use shadow::{shadow_depth, shadow_factor, shadow_factors, DepthMap};

use crate::embedding::DeformedSplats;
use crate::splat::{eval_sh, SplatScene};
use crate::{Mat3, Vec3};
use raster::{rasterize, Prim};

/// Screen-space dilation added to both diagonal entries, px².
pub const SCREEN_DILATION: f64 = 0.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid light: {0}")]
    InvalidLight(String),
    #[error("{what}: expected {expected}, got {got}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

/// Pinhole camera.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    /// Vertical field of view, radians.
    pub fov_y: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
    pub far: f64,
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            position: Vec3::new(0.0, 0.0, 3.0),
            look_at: Vec3::zeros(),
            up: Vec3::y(),
            fov_y: 50f64.to_radians(),
            width: 320,
            height: 240,
            near: 0.01,
            far: 100.0,
        }
    }
}

impl Camera {
    pub fn validate(&self) -> Result<(), RenderError> {
        let bad = |m: String| Err(RenderError::InvalidCamera(m));
        if !(self.fov_y > 0.0 && self.fov_y < std::f64::consts::PI) {
            return bad(format!("fov {} must be in (0, pi)", self.fov_y));
        }
        if self.width == 0 || self.height == 0 {
            return bad(format!("resolution {}x{}", self.width, self.height));
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return bad(format!("near {} / far {}", self.near, self.far));
        }
        let f = self.look_at - self.position;
        if !(f.norm() > 0.0) || f.cross(&self.up).norm() <= 1e-12 * f.norm() * self.up.norm() {
            return bad("look direction is zero or parallel to up".into());
        }
        Ok(())
    }

    /// World-to-view rotation; rows are right, up and forward. View `z` is
    /// the depth in front of the camera.
    pub fn view_rotation(&self) -> Mat3 {
        let f = (self.look_at - self.position).normalize();
        let r = f.cross(&self.up).normalize();
        let u = r.cross(&f);
        Mat3::from_rows(&[r.transpose(), u.transpose(), f.transpose()])
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        0.5 * self.height as f64 / (0.5 * self.fov_y).tan()
    }

    pub fn to_view(&self, p: &Vec3) -> Vec3 {
        self.view_rotation() * (p - self.position)
    }
}

/// Directional light with its shadow-map settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Light {
    /// Unit direction the light travels in.
    pub direction: Vec3,
    /// Shadow map is `resolution × resolution` texels.
    pub resolution: usize,
    /// Depth bias in metres; `None` uses two texel widths.
    pub bias: Option<f64>,
    /// Darkening of shadowed splats, in `[0, 1]`.
    pub strength: f64,
}

impl Default for Light {
    fn default() -> Self {
        Self {
            direction: -Vec3::y(),
            resolution: 256,
            bias: None,
            strength: 0.35,
        }
    }
}

impl Light {
    /// A light along `direction` (normalized here) with default settings.
    pub fn directional(direction: Vec3) -> Result<Self, RenderError> {
        let l = Self {
            direction: direction.try_normalize(1e-12).ok_or_else(|| {
                RenderError::InvalidLight("zero direction".into())
            })?,
            ..Self::default()
        };
        Ok(l)
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        let bad = |m: String| Err(RenderError::InvalidLight(m));
        if (self.direction.norm() - 1.0).abs() > 1e-9 {
            return bad(format!("direction {:?} is not unit length", self.direction));
        }
        if self.resolution == 0 {
            return bad("shadow map resolution must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.strength) {
            return bad(format!("strength {} must be in [0, 1]", self.strength));
        }
        if let Some(b) = self.bias {
            if !(b >= 0.0 && b.is_finite()) {
                return bad(format!("bias {b} must be >= 0"));
            }
        }
        Ok(())
    }

    /// Bias used with `map`.
    pub fn bias_for(&self, map: &DepthMap) -> f64 {
        self.bias.unwrap_or(2.0 * map.texel)
    }
}

/// A kernel in screen space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projected {
    /// Pixel coordinates.
    pub mean: Vector2<f64>,
    /// Screen covariance including the dilation, px².
    pub covariance: Matrix2<f64>,
    pub depth: f64,
}

/// EWA projection of one kernel. `None` when its mean is outside
/// `[near, far]`.
pub fn project_splat(mean: &Vec3, cov: &Mat3, camera: &Camera) -> Option<Projected> {
    let w = camera.view_rotation();
    project_with(mean, cov, camera, &w)
}

fn project_with(mean: &Vec3, cov: &Mat3, camera: &Camera, w: &Mat3) -> Option<Projected> {
    let t = w * (mean - camera.position);
    if !(t.z >= camera.near && t.z <= camera.far) {
        return None;
    }
    let f = camera.focal();
    let (cx, cy) = (0.5 * camera.width as f64, 0.5 * camera.height as f64);
    let iz = 1.0 / t.z;
    // u = cx + f x/z, v = cy - f y/z.
    let j = Matrix2x3::new(
        f * iz, 0.0, -f * t.x * iz * iz,
        0.0, -f * iz, f * t.y * iz * iz,
    );
    let jw = j * w;
    let mut c = jw * cov * jw.transpose();
    let off = 0.5 * (c[(0, 1)] + c[(1, 0)]);
    c[(0, 1)] = off;
    c[(1, 0)] = off;
    c[(0, 0)] += SCREEN_DILATION;
    c[(1, 1)] += SCREEN_DILATION;
    Some(Projected {
        mean: Vector2::new(cx + f * t.x * iz, cy - f * t.y * iz),
        covariance: c,
        depth: t.z,
    })
}

/// Indices sorted by `key` ascending; ties keep input order.
pub(crate) fn depth_order(keys: &[f64]) -> Vec<u32> {
    let mut order: Vec<u32> = (0..keys.len() as u32).collect();
    order.sort_by(|&a, &b| keys[a as usize].total_cmp(&keys[b as usize]));
    order
}

/// Renders the deformed kernels. Colors come from the rest SH along the
/// camera-to-mean direction, mapped into the kernel's rest frame by its SH
/// rotation, and are darkened by the shadow factor when a light is given.
pub fn render(
    splats: &DeformedSplats,
    scene: &SplatScene,
    camera: &Camera,
    light: Option<&Light>,
) -> Result<Image, RenderError> {
    camera.validate()?;
    if splats.len() != scene.len() {
        return Err(RenderError::CountMismatch {
            what: "splats",
            expected: scene.len(),
            got: splats.len(),
        });
    }
    let shade = match light {
        Some(l) => Some(shadow_factors(splats, &opacities(scene), l)?),
        None => None,
    };
    let w = camera.view_rotation();
    let (width, height) = (camera.width, camera.height);
    let projected: Vec<Option<(Projected, Prim)>> = {
        use rayon::prelude::*;
        (0..splats.len())
            .into_par_iter()
            .map(|i| {
                let p = project_with(&splats.means[i], &splats.covariances[i], camera, &w)?;
                let s = &scene.splats[i];
                let dir = (splats.means[i] - camera.position).normalize();
                let local = splats.rotations[i].transpose() * dir;
                let mut rgb = eval_sh(&s.sh_f64(), &local, scene.sh_degree);
                if let Some(f) = &shade {
                    rgb = rgb.map(|c| c * f[i]);
                }
                let c = p.covariance;
                let prim = Prim::new(
                    [p.mean.x, p.mean.y],
                    [c[(0, 0)], c[(0, 1)], c[(1, 1)]],
                    s.opacity(),
                    rgb,
                    width,
                    height,
                )?;
                Some((p, prim))
            })
            .collect()
    };
    let depth: Vec<f64> = projected
        .iter()
        .map(|p| p.as_ref().map_or(f64::INFINITY, |(p, _)| p.depth))
        .collect();
    let prims: Vec<Prim> = depth_order(&depth)
        .into_iter()
        .filter_map(|i| projected[i as usize].as_ref().map(|(_, prim)| *prim))
        .collect();
    let acc = rasterize(&prims, width, height);
    Ok(Image {
        width,
        height,
        pixels: acc
            .sum
            .iter()
            .map(|s| s.map(|c| c.clamp(0.0, 1.0) as f32))
            .collect(),
        transmittance: acc.transmittance.iter().map(|&t| t as f32).collect(),
    })
}

/// Renders the stored kernels directly.
pub fn render_scene(scene: &SplatScene, camera: &Camera, light: Option<&Light>) -> Result<Image, RenderError> {
    render(&DeformedSplats::from_scene(scene), scene, camera, light)
}

pub(crate) fn opacities(scene: &SplatScene) -> Vec<f64> {
    scene.splats.iter().map(|s| s.opacity()).collect()
}
