//! Shadow map rendered from a directional light with the splat blend.

use rayon::prelude::*;

use super::raster::{rasterize, Prim};
use super::{depth_order, Light, RenderError, SCREEN_DILATION};
use crate::embedding::DeformedSplats;
use crate::Vec3;

/// Expected depth seen from the light over an orthographic frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub resolution: usize,
    /// World size of one texel, m.
    pub texel: f64,
    /// World point at texel corner `(0, 0)` and depth 0.
    pub origin: Vec3,
    /// Texel `x` axis, texel `y` axis, light direction.
    pub axes: [Vec3; 3],
    /// Row-major depths, `+∞` where nothing was drawn.
    pub depth: Vec<f64>,
}

impl DepthMap {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.depth[j * self.resolution + i]
    }

    /// `(texel x, texel y, light depth)` of a world point.
    pub fn light_coords(&self, p: &Vec3) -> (f64, f64, f64) {
        let r = p - self.origin;
        (
            self.axes[0].dot(&r) / self.texel,
            self.axes[1].dot(&r) / self.texel,
            self.axes[2].dot(&r),
        )
    }

    /// Bilinear depth at texel coordinates, over the finite neighbours only.
    pub fn sample(&self, tx: f64, ty: f64) -> Option<f64> {
        let n = self.resolution;
        let last = (n - 1) as f64;
        let x = (tx - 0.5).clamp(0.0, last);
        let y = (ty - 0.5).clamp(0.0, last);
        let (i0, j0) = (x.floor() as usize, y.floor() as usize);
        let (i1, j1) = ((i0 + 1).min(n - 1), (j0 + 1).min(n - 1));
        let (fx, fy) = (x - i0 as f64, y - j0 as f64);
        let taps = [
            (i0, j0, (1.0 - fx) * (1.0 - fy)),
            (i1, j0, fx * (1.0 - fy)),
            (i0, j1, (1.0 - fx) * fy),
            (i1, j1, fx * fy),
        ];
        let (mut sum, mut weight) = (0.0, 0.0);
        for (i, j, w) in taps {
            let d = self.get(i, j);
            if d.is_finite() && w > 0.0 {
                sum += d * w;
                weight += w;
            }
        }
        (weight > 0.0).then(|| sum / weight)
    }

    pub fn covered_texels(&self) -> usize {
        self.depth.iter().filter(|d| d.is_finite()).count()
    }
}

fn frame_axes(d: &Vec3) -> [Vec3; 3] {
    let a = [Vec3::x(), Vec3::y(), Vec3::z()]
        .into_iter()
        .min_by(|a, b| a.dot(d).abs().total_cmp(&b.dot(d).abs()))
        .unwrap();
    let u = d.cross(&a).normalize();
    let v = d.cross(&u);
    [u, v, *d]
}

/// Renders the light's depth map over a frame fitted to the kernels.
pub fn shadow_depth(
    splats: &DeformedSplats,
    opacities: &[f64],
    light: &Light,
) -> Result<DepthMap, RenderError> {
    light.validate()?;
    if opacities.len() != splats.len() {
        return Err(RenderError::CountMismatch {
            what: "opacities",
            expected: splats.len(),
            got: opacities.len(),
        });
    }
    let n = light.resolution;
    let axes = frame_axes(&light.direction);
    let [u, v, d] = axes;
    let coords: Vec<[f64; 3]> = splats
        .means
        .iter()
        .map(|m| [u.dot(m), v.dot(m), d.dot(m)])
        .collect();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut pad: f64 = 0.0;
    for (c, cov) in coords.iter().zip(&splats.covariances) {
        if !c.iter().all(|x| x.is_finite()) {
            continue;
        }
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
        let s = (u.dot(&(cov * u))).max(v.dot(&(cov * v))).sqrt();
        if s.is_finite() {
            pad = pad.max(3.0 * s);
        }
    }
    if lo[0] > hi[0] {
        return Ok(DepthMap {
            resolution: n,
            texel: 1.0,
            origin: Vec3::zeros(),
            axes,
            depth: vec![f64::INFINITY; n * n],
        });
    }
    let extent = ((hi[0] - lo[0]).max(hi[1] - lo[1]) + 2.0 * pad).max(1e-6);
    let texel = extent / n as f64;
    let cu = 0.5 * (lo[0] + hi[0]) - 0.5 * extent;
    let cv = 0.5 * (lo[1] + hi[1]) - 0.5 * extent;
    let cd = lo[2] - pad;
    let origin = u * cu + v * cv + d * cd;

    let inv_t2 = 1.0 / (texel * texel);
    let depths: Vec<f64> = coords.iter().map(|c| c[2] - cd).collect();
    let prims: Vec<Option<Prim>> = (0..splats.len())
        .into_par_iter()
        .map(|i| {
            let c = &coords[i];
            let cov = &splats.covariances[i];
            let a = u.dot(&(cov * u)) * inv_t2 + SCREEN_DILATION;
            let b = u.dot(&(cov * v)) * inv_t2;
            let cc = v.dot(&(cov * v)) * inv_t2 + SCREEN_DILATION;
            Prim::new(
                [(c[0] - cu) / texel, (c[1] - cv) / texel],
                [a, b, cc],
                opacities[i],
                [depths[i], 1.0, 0.0],
                n,
                n,
            )
        })
        .collect();
    let sorted: Vec<Prim> = depth_order(&depths)
        .into_iter()
        .filter_map(|i| prims[i as usize])
        .collect();
    let acc = rasterize(&sorted, n, n);
    let depth = acc
        .sum
        .iter()
        .map(|s| if s[1] > 0.0 { s[0] / s[1] } else { f64::INFINITY })
        .collect();
    Ok(DepthMap {
        resolution: n,
        texel,
        origin,
        axes,
        depth,
    })
}

/// `1 − strength` when `mean` lies deeper than the sampled depth plus
/// `bias`, otherwise 1. Points outside the map are lit.
pub fn shadow_factor(mean: &Vec3, map: &DepthMap, light: &Light, bias: f64) -> f64 {
    let (tx, ty, depth) = map.light_coords(mean);
    let n = map.resolution as f64;
    if !(tx >= 0.0 && ty >= 0.0 && tx <= n && ty <= n) {
        return 1.0;
    }
    match map.sample(tx, ty) {
        Some(s) if depth > s + bias => 1.0 - light.strength,
        _ => 1.0,
    }
}

/// Shadow factor of every kernel against its own shadow map.
pub fn shadow_factors(
    splats: &DeformedSplats,
    opacities: &[f64],
    light: &Light,
) -> Result<Vec<f64>, RenderError> {
    let map = shadow_depth(splats, opacities, light)?;
    let bias = light.bias_for(&map);
    Ok(splats
        .means
        .par_iter()
        .map(|m| shadow_factor(m, &map, light, bias))
        .collect())
}
