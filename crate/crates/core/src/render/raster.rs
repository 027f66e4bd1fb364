//! Front-to-back blending of screen-space Gaussians over a tile grid.

use rayon::prelude::*;

/// Smallest contributing alpha.
pub const ALPHA_MIN: f64 = 1.0 / 255.0;
/// Blending stops once transmittance falls below this.
pub const TRANSMITTANCE_MIN: f64 = 1e-4;

const TILE: usize = 16;

/// A projected kernel ready for blending.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Prim {
    pub center: [f64; 2],
    /// Inverse 2D covariance `[a, b, c]` of `[[a, b], [b, c]]`.
    pub conic: [f64; 3],
    pub opacity: f64,
    pub value: [f64; 3],
    /// Inclusive pixel bounds `[x0, x1, y0, y1]`.
    pub bounds: [usize; 4],
}

impl Prim {
    /// Builds a primitive from a 2D covariance. Returns `None` when the kernel
    /// cannot reach `ALPHA_MIN` inside the `width × height` raster.
    pub fn new(
        center: [f64; 2],
        cov: [f64; 3],
        opacity: f64,
        value: [f64; 3],
        width: usize,
        height: usize,
    ) -> Option<Self> {
        let [a, b, c] = cov;
        let det = a * c - b * b;
        if !(det > 0.0) || !(opacity >= ALPHA_MIN) {
            return None;
        }
        let conic = [c / det, -b / det, a / det];
        let mid = 0.5 * (a + c);
        let lmax = mid + (mid * mid - det).max(0.0).sqrt();
        // exp(-q/2)·o ≥ 1/255  ⇔  q ≤ 2 ln(255 o).
        let reach = (2.0 * (opacity / ALPHA_MIN).ln() * lmax).sqrt();
        let lo_x = (center[0] - reach - 0.5).floor();
        let hi_x = (center[0] + reach - 0.5).ceil();
        let lo_y = (center[1] - reach - 0.5).floor();
        let hi_y = (center[1] + reach - 0.5).ceil();
        if !(hi_x >= 0.0 && hi_y >= 0.0 && lo_x < width as f64 && lo_y < height as f64) {
            return None;
        }
        let clamp = |v: f64, n: usize| v.clamp(0.0, (n - 1) as f64) as usize;
        Some(Self {
            center,
            conic,
            opacity,
            value,
            bounds: [
                clamp(lo_x, width),
                clamp(hi_x, width),
                clamp(lo_y, height),
                clamp(hi_y, height),
            ],
        })
    }

    #[inline]
    fn alpha(&self, px: f64, py: f64) -> f64 {
        let dx = px - self.center[0];
        let dy = py - self.center[1];
        let q = self.conic[0] * dx * dx + 2.0 * self.conic[1] * dx * dy + self.conic[2] * dy * dy;
        self.opacity * (-0.5 * q).exp()
    }
}

/// Per-pixel `Σ vᵢ αᵢ Tᵢ` and final transmittance.
pub(crate) struct Accum {
    pub sum: Vec<[f64; 3]>,
    pub transmittance: Vec<f64>,
}

/// Blends `prims` in the given order (front first) at every pixel centre.
pub(crate) fn rasterize(prims: &[Prim], width: usize, height: usize) -> Accum {
    let tiles_x = width.div_ceil(TILE);
    let tiles_y = height.div_ceil(TILE);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for (i, p) in prims.iter().enumerate() {
        let [x0, x1, y0, y1] = p.bounds;
        for ty in y0 / TILE..=y1 / TILE {
            for tx in x0 / TILE..=x1 / TILE {
                bins[ty * tiles_x + tx].push(i as u32);
            }
        }
    }

    let tiles: Vec<Vec<([f64; 3], f64)>> = bins
        .par_iter()
        .enumerate()
        .map(|(t, list)| {
            let ox = (t % tiles_x) * TILE;
            let oy = (t / tiles_x) * TILE;
            let w = TILE.min(width - ox);
            let h = TILE.min(height - oy);
            let mut out = Vec::with_capacity(w * h);
            for y in oy..oy + h {
                for x in ox..ox + w {
                    out.push(blend_pixel(prims, list, x, y));
                }
            }
            out
        })
        .collect();

    let mut sum = vec![[0.0; 3]; width * height];
    let mut transmittance = vec![1.0; width * height];
    for (t, px) in tiles.into_iter().enumerate() {
        let ox = (t % tiles_x) * TILE;
        let oy = (t / tiles_x) * TILE;
        let w = TILE.min(width - ox);
        for (k, (s, tr)) in px.into_iter().enumerate() {
            let idx = (oy + k / w) * width + ox + k % w;
            sum[idx] = s;
            transmittance[idx] = tr;
        }
    }
    Accum {
        sum,
        transmittance,
    }
}

fn blend_pixel(prims: &[Prim], list: &[u32], x: usize, y: usize) -> ([f64; 3], f64) {
    let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
    let mut acc = [0.0; 3];
    let mut t = 1.0;
    for &i in list {
        let p = &prims[i as usize];
        let [x0, x1, y0, y1] = p.bounds;
        if x < x0 || x > x1 || y < y0 || y > y1 {
            continue;
        }
        let a = p.alpha(px, py).min(1.0);
        if a < ALPHA_MIN {
            continue;
        }
        let w = a * t;
        for c in 0..3 {
            acc[c] += p.value[c] * w;
        }
        t *= 1.0 - a;
        if t < TRANSMITTANCE_MIN {
            break;
        }
    }
    (acc, t)
}
