//! Deterministic synthetic splat assets for tests, demos and benches.

use nalgebra::{Quaternion, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::splat::{opacity_logit, GaussianSplat, SplatScene};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// 0.8 × 0.16 × 0.16 m bar along x, about 6,400 splats.
    Bar,
    /// Ball of radius 0.12 m.
    Blob,
    /// Flat 1.6 × 1.6 m sheet in the `y = 0` plane.
    Ground,
    /// Four-legged body with head and tail, about 0.6 m long.
    Critter,
}

impl SynthKind {
    pub const ALL: [SynthKind; 4] = [Self::Bar, Self::Blob, Self::Ground, Self::Critter];

    pub fn name(self) -> &'static str {
        match self {
            Self::Bar => "bar",
            Self::Blob => "blob",
            Self::Ground => "ground",
            Self::Critter => "critter",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Parses `synth:<name>`.
    pub fn from_uri(uri: &str) -> Option<Self> {
        uri.strip_prefix("synth:").and_then(Self::from_name)
    }

    pub fn generate(self, seed: u64) -> SplatScene {
        match self {
            Self::Bar => bar(seed, 0.015),
            Self::Blob => blob(seed, 0.12, 0.02),
            Self::Ground => ground(seed, 0.8, 0.04),
            Self::Critter => critter(seed),
        }
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> [f32; 4] {
    let q = loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = v.iter().map(|c| c * c).sum::<f64>();
        if n > 1e-3 && n <= 1.0 {
            break UnitQuaternion::from_quaternion(Quaternion::new(v[0], v[1], v[2], v[3]));
        }
    };
    [q.w as f32, q.i as f32, q.j as f32, q.k as f32]
}

fn kernel(rng: &mut ChaCha8Rng, p: Vec3, spacing: f64, rgb: [f64; 3]) -> GaussianSplat {
    let mut s = GaussianSplat {
        mean: [p.x as f32, p.y as f32, p.z as f32],
        rotation: random_rotation(rng),
        log_scale: std::array::from_fn(|_| (spacing * rng.random_range(0.3..0.6)).ln() as f32),
        opacity_logit: opacity_logit(rng.random_range(0.6..0.95)) as f32,
        segment_label: 1,
        ..GaussianSplat::default()
    };
    s.set_base_color(rgb);
    s
}

/// Jittered lattice points with `inside(p)`, within `[lo, hi]`.
fn lattice(
    rng: &mut ChaCha8Rng,
    lo: Vec3,
    hi: Vec3,
    spacing: f64,
    inside: impl Fn(&Vec3) -> bool,
) -> Vec<Vec3> {
    let n = (hi - lo).map(|e| (e / spacing).floor() as usize + 1);
    let mut out = Vec::new();
    for k in 0..n.z {
        for j in 0..n.y {
            for i in 0..n.x {
                let base = lo + Vec3::new(i as f64, j as f64, k as f64) * spacing;
                let p = base + Vec3::from_fn(|_, _| rng.random_range(-0.25..0.25) * spacing);
                if inside(&p) {
                    out.push(p);
                }
            }
        }
    }
    out
}

pub fn bar(seed: u64, spacing: f64) -> SplatScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = Vec3::new(0.4, 0.08, 0.08);
    let pts = lattice(&mut rng, -half, half, spacing, |p| (0..3).all(|a| p[a].abs() <= half[a]));
    let splats = pts
        .into_iter()
        .map(|p| {
            let u = (p.x + 0.4) / 0.8;
            kernel(&mut rng, p, spacing, [0.9, 0.3 + 0.6 * u, 0.15])
        })
        .collect();
    SplatScene::from_splats(splats, 0)
}

pub fn blob(seed: u64, radius: f64, spacing: f64) -> SplatScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = Vec3::repeat(radius);
    let pts = lattice(&mut rng, -r, r, spacing, |p| p.norm() <= radius);
    let splats = pts
        .into_iter()
        .map(|p| kernel(&mut rng, p, spacing, [0.2, 0.4, 0.9]))
        .collect();
    SplatScene::from_splats(splats, 0)
}

pub fn ground(seed: u64, half: f64, spacing: f64) -> SplatScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (2.0 * half / spacing).round() as usize;
    let mut splats = Vec::with_capacity(n * n);
    for k in 0..n {
        for i in 0..n {
            let p = Vec3::new(-half + (i as f64 + 0.5) * spacing, 0.0, -half + (k as f64 + 0.5) * spacing);
            let shade = if (i / 5 + k / 5) % 2 == 0 { 0.75 } else { 0.55 };
            let mut s = kernel(&mut rng, p, spacing, [shade; 3]);
            let flat = (spacing * 0.6).ln() as f32;
            s.log_scale = [flat, (spacing * 0.08).ln() as f32, flat];
            s.rotation = [1.0, 0.0, 0.0, 0.0];
            s.opacity_logit = opacity_logit(0.95) as f32;
            s.segment_label = 0;
            splats.push(s);
        }
    }
    SplatScene::from_splats(splats, 0)
}

pub fn critter(seed: u64) -> SplatScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spacing = 0.012;
    let ellipsoid = |c: Vec3, r: Vec3| move |p: &Vec3| ((p - c).component_div(&r)).norm_squared() <= 1.0;
    let body = ellipsoid(Vec3::new(0.0, 0.25, 0.0), Vec3::new(0.2, 0.1, 0.09));
    let head = ellipsoid(Vec3::new(0.24, 0.34, 0.0), Vec3::new(0.08, 0.07, 0.07));
    let tail = ellipsoid(Vec3::new(-0.27, 0.3, 0.0), Vec3::new(0.1, 0.03, 0.03));
    let legs = |p: &Vec3| {
        [(-0.12, -0.05), (-0.12, 0.05), (0.12, -0.05), (0.12, 0.05)]
            .iter()
            .any(|&(x, z)| (p.x - x).hypot(p.z - z) <= 0.03 && p.y >= 0.0 && p.y <= 0.2)
    };
    let pts = lattice(
        &mut rng,
        Vec3::new(-0.38, 0.0, -0.1),
        Vec3::new(0.33, 0.42, 0.1),
        spacing,
        |p| body(p) || head(p) || tail(p) || legs(p),
    );
    let splats = pts
        .into_iter()
        .map(|p| {
            let rgb = if p.y < 0.2 { [0.35, 0.2, 0.1] } else { [0.85, 0.45, 0.15] };
            kernel(&mut rng, p, spacing, rgb)
        })
        .collect();
    SplatScene::from_splats(splats, 0)
}
