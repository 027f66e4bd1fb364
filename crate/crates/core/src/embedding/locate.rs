//! Point location in a tet mesh with a uniform spatial hash over tet bounds.

use crate::math::barycentric_with_inverse;
use crate::meshgen::TetMesh;
use crate::Vec3;

/// Containment threshold on the smallest barycentric coordinate.
pub const CONTAINMENT_EPS: f64 = 1e-6;

pub struct TetLocator<'a> {
    mesh: &'a TetMesh,
    lo: Vec3,
    h: f64,
    dims: [usize; 3],
    /// CSR layout: tets of cell `c` are `items[starts[c]..starts[c + 1]]`,
    /// ascending by tet index.
    starts: Vec<u32>,
    items: Vec<u32>,
    centroids: Vec<Vec3>,
}

impl<'a> TetLocator<'a> {
    pub fn new(mesh: &'a TetMesh) -> Self {
        let (lo, hi) = mesh.bounds();
        let extent = hi - lo;
        // Cell edge on the order of one tet.
        let mean_edge = if mesh.tets.is_empty() {
            1.0
        } else {
            let total: f64 = mesh.rest_volume.iter().sum();
            (6.0 * total / mesh.tets.len() as f64).cbrt().max(1e-12)
        };
        let mut h = mean_edge * 1.5;
        // Keep the table bounded for pathological inputs.
        while (extent / h).iter().map(|v| v.ceil() + 1.0).product::<f64>() > 8.0e6 {
            h *= 1.5;
        }
        let dims = [0, 1, 2].map(|a| ((extent[a] / h).floor() as usize + 1).max(1));
        let n_cells = dims[0] * dims[1] * dims[2];
        let centroids: Vec<Vec3> = (0..mesh.tets.len())
            .map(|t| mesh.tet_positions(t).iter().sum::<Vec3>() / 4.0)
            .collect();

        let mut locator = Self {
            mesh,
            lo,
            h,
            dims,
            starts: Vec::new(),
            items: Vec::new(),
            centroids,
        };
        let mut counts = vec![0u32; n_cells + 1];
        locator.for_each_tet_cell(|c, _| counts[c + 1] += 1);
        for c in 0..n_cells {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; counts[n_cells] as usize];
        locator.for_each_tet_cell(|c, t| {
            items[fill[c] as usize] = t as u32;
            fill[c] += 1;
        });
        locator.starts = counts;
        locator.items = items;
        locator
    }

    fn for_each_tet_cell(&self, mut f: impl FnMut(usize, usize)) {
        for t in 0..self.mesh.tets.len() {
            let x = self.mesh.tet_positions(t);
            let mut lo = x[0];
            let mut hi = x[0];
            for p in &x[1..] {
                lo = lo.inf(p);
                hi = hi.sup(p);
            }
            let a = self.cell_coords(&lo);
            let b = self.cell_coords(&hi);
            for k in a[2]..=b[2] {
                for j in a[1]..=b[1] {
                    for i in a[0]..=b[0] {
                        f(self.cell_index([i, j, k]), t);
                    }
                }
            }
        }
    }

    /// Cell of `p`, clamped into the grid.
    fn cell_coords(&self, p: &Vec3) -> [usize; 3] {
        [0, 1, 2].map(|a| {
            let c = ((p[a] - self.lo[a]) / self.h).floor();
            (c.max(0.0) as usize).min(self.dims[a] - 1)
        })
    }

    fn cell_index(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    fn cell_tets(&self, c: [usize; 3]) -> &[u32] {
        let i = self.cell_index(c);
        &self.items[self.starts[i] as usize..self.starts[i + 1] as usize]
    }

    fn weights(&self, t: usize, p: &Vec3) -> [f64; 4] {
        let x0 = self.mesh.vertices[self.mesh.tets[t][0] as usize];
        barycentric_with_inverse(&x0, &self.mesh.rest_inverse_basis[t], p)
    }

    /// Lowest-index tet whose barycentrics of `p` are all `>= -CONTAINMENT_EPS`.
    pub fn locate(&self, p: &Vec3) -> Option<(usize, [f64; 4])> {
        if self.mesh.tets.is_empty() {
            return None;
        }
        let c = self.cell_coords(p);
        self.cell_tets(c).iter().find_map(|&t| {
            let w = self.weights(t as usize, p);
            w.iter()
                .all(|&v| v >= -CONTAINMENT_EPS)
                .then_some((t as usize, w))
        })
    }

    /// Tet with the nearest centroid (ties to the lowest index) and the
    /// extrapolated barycentrics of `p` in it.
    pub fn nearest(&self, p: &Vec3) -> Option<(usize, [f64; 4])> {
        if self.mesh.tets.is_empty() {
            return None;
        }
        let c = self.cell_coords(p).map(|v| v as i64);
        let dims = self.dims.map(|v| v as i64);
        let mut best: Option<(f64, usize)> = None;
        for r in 0i64.. {
            for k in (c[2] - r)..=(c[2] + r) {
                for j in (c[1] - r)..=(c[1] + r) {
                    for i in (c[0] - r)..=(c[0] + r) {
                        let on_shell = (i - c[0]).abs() == r
                            || (j - c[1]).abs() == r
                            || (k - c[2]).abs() == r;
                        let inside = i >= 0
                            && j >= 0
                            && k >= 0
                            && i < dims[0]
                            && j < dims[1]
                            && k < dims[2];
                        if !on_shell || !inside {
                            continue;
                        }
                        for &t in self.cell_tets([i as usize, j as usize, k as usize]) {
                            let t = t as usize;
                            let d = (self.centroids[t] - p).norm_squared();
                            let better = match best {
                                None => true,
                                Some((bd, bt)) => d < bd || (d == bd && t < bt),
                            };
                            if better {
                                best = Some((d, t));
                            }
                        }
                    }
                }
            }
            // Every tet whose centroid is inside the scanned block is seen, so
            // stop once no unscanned centroid can be closer.
            let covers_all = (0..3).all(|a| c[a] - r <= 0 && c[a] + r >= dims[a] - 1);
            if covers_all {
                break;
            }
            if let Some((bd, _)) = best {
                let mut bound = f64::INFINITY;
                for a in 0..3 {
                    let lo = self.lo[a] + (c[a] - r) as f64 * self.h;
                    let hi = self.lo[a] + (c[a] + r + 1) as f64 * self.h;
                    bound = bound.min(p[a] - lo).min(hi - p[a]);
                }
                if bound >= 0.0 && bd.sqrt() <= bound {
                    break;
                }
            }
        }
        best.map(|(_, t)| (t, self.weights(t, p)))
    }
}
