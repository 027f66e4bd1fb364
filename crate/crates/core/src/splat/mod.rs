//! Gaussian kernel data model and the math every other module consumes.
//!
//! Storage follows the usual splat asset conventions: per-axis log standard
//! deviations, an opacity logit, and SH coefficients whose DC term carries a
//! `+0.5` color offset. Stored fields are `f32` so PLY round-trips are
//! bit-exact; derived quantities are computed in `f64`.

mod ply;
mod sh;

use std::collections::BTreeMap;

use nalgebra::{Quaternion, UnitQuaternion};

pub use ply::{load_splats, save_splats, PlyError};
pub use sh::{eval_sh, SH_C0, SH_COEFFS};

use crate::{Mat3, Vec3};

/// One anisotropic Gaussian kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSplat {
    pub mean: [f32; 3],
    /// Unit quaternion, `(w, x, y, z)`.
    pub rotation: [f32; 4],
    pub log_scale: [f32; 3],
    pub opacity_logit: f32,
    /// `sh[channel][coefficient]`, coefficient 0 is the DC term.
    pub sh: [[f32; SH_COEFFS]; 3],
    pub segment_label: i32,
}

impl Default for GaussianSplat {
    fn default() -> Self {
        Self {
            mean: [0.0; 3],
            rotation: [1.0, 0.0, 0.0, 0.0],
            log_scale: [0.0; 3],
            opacity_logit: 0.0,
            sh: [[0.0; SH_COEFFS]; 3],
            segment_label: 0,
        }
    }
}

impl GaussianSplat {
    pub fn mean(&self) -> Vec3 {
        Vec3::new(self.mean[0] as f64, self.mean[1] as f64, self.mean[2] as f64)
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        let q = self.rotation;
        UnitQuaternion::new_unchecked(Quaternion::new(
            q[0] as f64,
            q[1] as f64,
            q[2] as f64,
            q[3] as f64,
        ))
    }

    pub fn log_scale(&self) -> Vec3 {
        Vec3::new(
            self.log_scale[0] as f64,
            self.log_scale[1] as f64,
            self.log_scale[2] as f64,
        )
    }

    /// Per-axis standard deviations.
    pub fn scale(&self) -> Vec3 {
        self.log_scale().map(f64::exp)
    }

    pub fn opacity(&self) -> f64 {
        opacity(self.opacity_logit as f64)
    }

    pub fn covariance(&self) -> Mat3 {
        // Stored splats are validated on construction, so this cannot fail.
        covariance(&self.log_scale(), &self.rotation()).unwrap_or_else(|_| Mat3::identity())
    }

    /// SH coefficients widened to `f64`.
    pub fn sh_f64(&self) -> [[f64; SH_COEFFS]; 3] {
        let mut out = [[0.0; SH_COEFFS]; 3];
        for (o, s) in out.iter_mut().zip(self.sh.iter()) {
            for (a, b) in o.iter_mut().zip(s.iter()) {
                *a = *b as f64;
            }
        }
        out
    }

    /// Base color (DC term only) for a given RGB in `[0, 1]`.
    pub fn set_base_color(&mut self, rgb: [f64; 3]) {
        for c in 0..3 {
            self.sh[c][0] = ((rgb[c] - 0.5) / SH_C0) as f32;
        }
    }
}

/// Whether an object is driven by the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectInfo {
    pub name: String,
    pub kind: ObjectKind,
}

/// Ordered splat list plus the segment table.
#[derive(Debug, Clone, PartialEq)]
pub struct SplatScene {
    pub splats: Vec<GaussianSplat>,
    pub objects: BTreeMap<i32, ObjectInfo>,
    /// Highest SH degree carried by the asset (0..=3).
    pub sh_degree: usize,
}

impl Default for SplatScene {
    fn default() -> Self {
        Self {
            splats: Vec::new(),
            objects: BTreeMap::new(),
            sh_degree: 3,
        }
    }
}

impl SplatScene {
    /// Builds a scene and derives the segment table from the splat labels.
    pub fn from_splats(splats: Vec<GaussianSplat>, sh_degree: usize) -> Self {
        let mut scene = Self {
            splats,
            objects: BTreeMap::new(),
            sh_degree,
        };
        scene.index_objects();
        scene
    }

    /// Adds a default entry for every label not already in the table.
    pub fn index_objects(&mut self) {
        for s in &self.splats {
            self.objects
                .entry(s.segment_label)
                .or_insert_with(|| default_object(s.segment_label));
        }
    }

    pub fn len(&self) -> usize {
        self.splats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splats.is_empty()
    }

    pub fn means(&self) -> Vec<Vec3> {
        self.splats.iter().map(GaussianSplat::mean).collect()
    }

    /// Applies a rigid pose `x ↦ r·x + t` to every kernel.
    pub fn transform(&mut self, rotation: &UnitQuaternion<f64>, translation: &Vec3) {
        for s in &mut self.splats {
            let m = rotation * s.mean() + translation;
            s.mean = [m.x as f32, m.y as f32, m.z as f32];
            let q = rotation * s.rotation();
            s.rotation = [q.w as f32, q.i as f32, q.j as f32, q.k as f32];
        }
    }
}

fn default_object(label: i32) -> ObjectInfo {
    if label == 0 {
        ObjectInfo {
            name: "background".into(),
            kind: ObjectKind::Static,
        }
    } else {
        ObjectInfo {
            name: format!("segment_{label}"),
            kind: ObjectKind::Dynamic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("non-finite covariance input")]
pub struct NonFiniteError;

/// `Σ = R S Sᵀ Rᵀ` with `S = diag(exp(log_scale))`.
///
/// The result is assembled from its upper triangle so it is exactly symmetric.
pub fn covariance(
    log_scale: &Vec3,
    rotation: &UnitQuaternion<f64>,
) -> Result<Mat3, NonFiniteError> {
    if !log_scale.iter().all(|v| v.is_finite()) || !rotation.coords.iter().all(|v| v.is_finite())
    {
        return Err(NonFiniteError);
    }
    let r = rotation.to_rotation_matrix().into_inner();
    let var = log_scale.map(|l| (2.0 * l).exp());
    let mut cov = Mat3::zeros();
    for i in 0..3 {
        for j in i..3 {
            let mut acc = 0.0;
            for k in 0..3 {
                acc += r[(i, k)] * var[k] * r[(j, k)];
            }
            cov[(i, j)] = acc;
            cov[(j, i)] = acc;
        }
    }
    Ok(cov)
}

/// Logistic sigmoid of the stored opacity logit.
pub fn opacity(logit: f64) -> f64 {
    if logit >= 0.0 {
        1.0 / (1.0 + (-logit).exp())
    } else {
        let e = logit.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`opacity`].
pub fn opacity_logit(alpha: f64) -> f64 {
    (alpha / (1.0 - alpha)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eigenvalues_sorted(m: &Mat3) -> [f64; 3] {
        let mut e: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        [e[0], e[1], e[2]]
    }

    #[test]
    fn identity_covariance() {
        let c = covariance(&Vec3::zeros(), &UnitQuaternion::identity()).unwrap();
        assert_eq!(c, Mat3::identity());
    }

    #[test]
    fn rotated_anisotropic_covariance() {
        // diag(4, 1, 1) rotated 90° about z swaps the x and y variances.
        let q = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), std::f64::consts::FRAC_PI_2);
        let c = covariance(&Vec3::new(2f64.ln(), 0.0, 0.0), &q).unwrap();
        let expected = Mat3::from_diagonal(&Vec3::new(1.0, 4.0, 1.0));
        assert!((c - expected).abs().max() < 1e-12);
    }

    #[test]
    fn covariance_rejects_nan() {
        assert!(covariance(&Vec3::new(f64::NAN, 0.0, 0.0), &UnitQuaternion::identity()).is_err());
    }

    #[test]
    fn opacity_values() {
        assert_eq!(opacity(0.0), 0.5);
        assert!(opacity(20.0) >= 0.999999);
        for x in [0.1, 1.0, 3.5, 40.0] {
            assert!((opacity(x) + opacity(-x) - 1.0).abs() < 1e-15);
        }
        assert!((opacity(opacity_logit(0.3)) - 0.3).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn covariance_symmetric_with_expected_spectrum(
            ls in prop::array::uniform3(-3.0f64..1.0),
            q in prop::array::uniform4(-1.0f64..1.0),
        ) {
            prop_assume!(q.iter().map(|v| v * v).sum::<f64>() > 1e-3);
            let rot = crate::math::quat_wxyz(q);
            let ls = Vec3::from(ls);
            let c = covariance(&ls, &rot).unwrap();
            prop_assert_eq!(c, c.transpose());

            let neg = UnitQuaternion::new_unchecked(-rot.into_inner());
            prop_assert_eq!(covariance(&ls, &neg).unwrap(), c);

            let got = eigenvalues_sorted(&c);
            let mut want: Vec<f64> = ls.iter().map(|l| (2.0 * l).exp()).collect();
            want.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for k in 0..3 {
                prop_assert!((got[k] - want[k]).abs() <= 1e-9 * want[2]);
            }
        }
    }
}
