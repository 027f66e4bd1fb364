//! Ground plane, static signed-distance grid, and dynamic vertex repulsion.

use std::collections::HashMap;

use crate::meshgen::VoxelGrid;
use crate::Vec3;

/// Horizontal plane `y = height`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ground {
    pub height: f64,
    /// In `[0, 1]`; 1 removes all tangential motion during contact.
    pub friction: f64,
}

/// Signed distance sampled at voxel centers; negative inside.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticSdf {
    origin: Vec3,
    h: f64,
    dims: [usize; 3],
    values: Vec<f64>,
}

const INF: f64 = 1e20;

/// Felzenszwalb-Huttenlocher 1D squared distance transform, in place.
fn edt_1d(f: &mut [f64], v: &mut [usize], z: &mut [f64], d: &mut [f64]) {
    let n = f.len();
    let mut k = 0;
    v[0] = 0;
    z[0] = -INF;
    z[1] = INF;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere.
                v[0] = q;
                z[0] = -INF;
                z[1] = INF;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = INF;
            }
            break;
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        d[q] = (q as f64 - p as f64).powi(2) + f[p];
    }
    f.copy_from_slice(&d[..n]);
}

/// Squared Euclidean distance (in cells) from every cell to the nearest
/// cell where `feature` holds.
fn edt_3d(dims: [usize; 3], feature: impl Fn(usize) -> bool) -> Vec<f64> {
    let [nx, ny, nz] = dims;
    let mut g: Vec<f64> = (0..nx * ny * nz)
        .map(|i| if feature(i) { 0.0 } else { INF })
        .collect();
    let n = nx.max(ny).max(nz);
    let (mut line, mut v, mut z, mut d) = (vec![0.0; n], vec![0; n], vec![0.0; n + 1], vec![0.0; n]);
    let idx = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    for axis in 0..3 {
        let len = dims[axis];
        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
        for u in 0..dims[a] {
            for w in 0..dims[b] {
                let at = |t: usize| {
                    let mut c = [0; 3];
                    c[axis] = t;
                    c[a] = u;
                    c[b] = w;
                    idx(c[0], c[1], c[2])
                };
                for t in 0..len {
                    line[t] = g[at(t)];
                }
                edt_1d(&mut line[..len], &mut v, &mut z, &mut d);
                for t in 0..len {
                    g[at(t)] = line[t];
                }
            }
        }
    }
    g
}

impl StaticSdf {
    /// Distance field of the occupied region. The surface sits half a cell
    /// from the centers of boundary cells.
    pub fn from_occupancy(grid: &VoxelGrid) -> Self {
        let occ = |i: usize| {
            let [a, b, c] = grid.coords(i);
            grid.get(a, b, c)
        };
        let outside = edt_3d(grid.dims, occ);
        let inside = edt_3d(grid.dims, |i| !occ(i));
        let h = grid.cell_size;
        let values = (0..grid.len())
            .map(|i| {
                if occ(i) {
                    -(inside[i].min(INF).sqrt() - 0.5) * h
                } else {
                    (outside[i].min(INF).sqrt() - 0.5) * h
                }
            })
            .collect();
        Self {
            origin: grid.origin + Vec3::repeat(0.5 * h),
            h,
            dims: grid.dims,
            values,
        }
    }

    fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[i + self.dims[0] * (j + self.dims[1] * k)]
    }

    /// Trilinear sample; points outside the grid add their distance to it.
    pub fn sample(&self, p: &Vec3) -> f64 {
        let mut g = (p - self.origin) / self.h;
        let mut outside = 0.0;
        for a in 0..3 {
            let hi = (self.dims[a] - 1) as f64;
            let c = g[a].clamp(0.0, hi);
            outside += (g[a] - c).powi(2);
            g[a] = c;
        }
        let base = [0, 1, 2].map(|a| (g[a].floor() as usize).min(self.dims[a].saturating_sub(2)));
        let t = [0, 1, 2].map(|a| g[a] - base[a] as f64);
        let mut acc = 0.0;
        for corner in 0..8 {
            let mut w = 1.0;
            let mut c = [0; 3];
            for a in 0..3 {
                let bit = (corner >> a) & 1;
                c[a] = (base[a] + bit).min(self.dims[a] - 1);
                w *= if bit == 1 { t[a] } else { 1.0 - t[a] };
            }
            if w != 0.0 {
                acc += w * self.value(c[0], c[1], c[2]);
            }
        }
        acc + outside.sqrt() * self.h
    }

    /// Normalized central-difference gradient.
    pub fn normal(&self, p: &Vec3) -> Vec3 {
        let e = 0.25 * self.h;
        let g = Vec3::from_fn(|a, _| {
            let mut d = Vec3::zeros();
            d[a] = e;
            self.sample(&(p + d)) - self.sample(&(p - d))
        });
        let n = g.norm();
        if n > 1e-12 {
            g / n
        } else {
            Vec3::y()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CollisionEnv {
    pub ground: Option<Ground>,
    pub sdf: Option<StaticSdf>,
    /// Vertices of different bodies are kept at least this far apart (0 off).
    pub repulsion_radius: f64,
}

/// Moves `x` out of the ground and SDF. With `friction`, vertices in contact
/// (including resting exactly on a surface) also have their tangential motion
/// since `prev` scaled. Returns whether it touched.
pub fn resolve_static(env: &CollisionEnv, x: &mut Vec3, prev: &Vec3, friction: bool) -> bool {
    let mut touched = false;
    let contact = |d: f64| d > 0.0 || (friction && d >= 0.0);
    if let Some(sdf) = &env.sdf {
        let d = sdf.sample(x);
        if contact(-d) {
            let n = sdf.normal(x);
            *x -= n * d;
            if friction {
                // The static objects have no material friction of their own;
                // they share the ground coefficient.
                let mu = env.ground.map_or(0.0, |g| g.friction);
                apply_friction(x, prev, &n, mu);
            }
            touched = true;
        }
    }
    if let Some(g) = env.ground {
        let d = g.height - x.y;
        if contact(d) {
            x.y = g.height;
            if friction {
                apply_friction(x, prev, &Vec3::y(), g.friction);
            }
            touched = true;
        }
    }
    touched
}

fn apply_friction(x: &mut Vec3, prev: &Vec3, n: &Vec3, friction: f64) {
    let dx = *x - prev;
    let tangential = dx - n * dx.dot(n);
    *x -= tangential * friction.clamp(0.0, 1.0);
}

/// Candidate vertex pairs from different bodies closer than `reach`.
pub fn find_pairs(x: &[Vec3], body: &[u32], reach: f64) -> Vec<(u32, u32)> {
    if reach <= 0.0 {
        return Vec::new();
    }
    let key = |p: &Vec3| {
        [0, 1, 2].map(|a| (p[a] / reach).floor() as i64)
    };
    let mut cells: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    for (i, p) in x.iter().enumerate() {
        cells.entry(key(p)).or_default().push(i as u32);
    }
    let mut pairs = Vec::new();
    for (i, p) in x.iter().enumerate() {
        let c = key(p);
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let Some(list) = cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                        continue;
                    };
                    for &j in list {
                        let j = j as usize;
                        if j > i && body[i] != body[j] && (x[j] - p).norm() < reach {
                            pairs.push((i as u32, j as u32));
                        }
                    }
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Pushes a vertex pair apart to distance `radius`, weighted by inverse mass.
pub fn project_pair(xi: &mut Vec3, xj: &mut Vec3, wi: f64, wj: f64, radius: f64) {
    let d = *xi - *xj;
    let len = d.norm();
    let wsum = wi + wj;
    if len >= radius || len < 1e-12 || wsum == 0.0 {
        return;
    }
    let n = d / len;
    let c = len - radius;
    let s = -c / wsum;
    *xi += n * (wi * s);
    *xj -= n * (wj * s);
}
