use std::collections::VecDeque;

use bitvec::vec::BitVec;

use super::MeshError;
use crate::Vec3;

/// Dense occupancy grid.
///
/// Cell `(i, j, k)` spans `origin + [i, i+1) × cell_size` on each axis.
/// Constructors in this module always leave a one-cell empty margin around
/// every occupied cell.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub cell_size: f64,
    pub dims: [usize; 3],
    occupancy: BitVec,
}

impl VoxelGrid {
    pub fn empty(origin: Vec3, cell_size: f64, dims: [usize; 3]) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        Self {
            origin,
            cell_size,
            dims,
            occupancy: BitVec::repeat(false, n),
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.occupancy[self.index(i, j, k)]
    }

    /// Occupancy with out-of-range coordinates reading as empty.
    #[inline]
    pub fn get_signed(&self, i: i64, j: i64, k: i64) -> bool {
        if i < 0 || j < 0 || k < 0 {
            return false;
        }
        let (i, j, k) = (i as usize, j as usize, k as usize);
        if i >= self.dims[0] || j >= self.dims[1] || k >= self.dims[2] {
            return false;
        }
        self.get(i, j, k)
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        let idx = self.index(i, j, k);
        self.occupancy.set(idx, value);
    }

    pub fn len(&self) -> usize {
        self.occupancy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancy.is_empty()
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.count_ones()
    }

    pub fn occupied(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.occupancy.iter_ones().map(|idx| self.coords(idx))
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.cell_size
    }

    /// Cell containing `p`, if inside the grid.
    pub fn cell_of(&self, p: &Vec3) -> Option<[usize; 3]> {
        let l = (p - self.origin) / self.cell_size;
        let mut out = [0; 3];
        for a in 0..3 {
            let f = l[a].floor();
            if !(f >= 0.0 && (f as usize) < self.dims[a]) {
                return None;
            }
            out[a] = f as usize;
        }
        Some(out)
    }

    /// True when no boundary cell is occupied.
    pub fn has_empty_margin(&self) -> bool {
        self.occupied().all(|[i, j, k]| {
            i > 0
                && j > 0
                && k > 0
                && i + 1 < self.dims[0]
                && j + 1 < self.dims[1]
                && k + 1 < self.dims[2]
        })
    }

    /// Grows the occupancy by `radius` cells (26-neighbourhood), enlarging the
    /// grid so the empty margin is preserved.
    pub fn dilate(&self, radius: usize) -> VoxelGrid {
        if radius == 0 {
            return self.clone();
        }
        let dims = self.dims.map(|d| d + 2 * radius);
        let origin = self.origin - Vec3::repeat(radius as f64 * self.cell_size);
        let mut out = VoxelGrid::empty(origin, self.cell_size, dims);
        let r = radius as i64;
        for [i, j, k] in self.occupied() {
            let (ci, cj, ck) = (i as i64 + r, j as i64 + r, k as i64 + r);
            for dk in -r..=r {
                for dj in -r..=r {
                    for di in -r..=r {
                        out.set(
                            (ci + di) as usize,
                            (cj + dj) as usize,
                            (ck + dk) as usize,
                            true,
                        );
                    }
                }
            }
        }
        out
    }
}

/// Marks every cell that contains at least one point, then adds a one-cell
/// empty margin on all sides.
pub fn voxelize(points: &[Vec3], cell_size: f64) -> Result<VoxelGrid, MeshError> {
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(MeshError::InvalidCellSize(cell_size));
    }
    if points.is_empty() {
        return Err(MeshError::EmptyInput);
    }
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for (index, p) in points.iter().enumerate() {
        if !p.iter().all(|c| c.is_finite()) {
            return Err(MeshError::NonFinitePoint { index });
        }
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let mut spanned = [0usize; 3];
    for a in 0..3 {
        let n = ((hi[a] - lo[a]) / cell_size).ceil();
        if n > 4096.0 {
            return Err(MeshError::GridTooLarge);
        }
        spanned[a] = (n as usize).max(1);
    }
    let dims = spanned.map(|n| n + 2);
    let origin = lo - Vec3::repeat(cell_size);
    let mut grid = VoxelGrid::empty(origin, cell_size, dims);
    for p in points {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - lo[a]) / cell_size).floor() as usize;
            c[a] = f.min(spanned[a] - 1) + 1;
        }
        grid.set(c[0], c[1], c[2], true);
    }
    Ok(grid)
}

/// Flood-fills empty space from the margin (6-connectivity); every empty
/// cell the fill cannot reach becomes occupied.
pub fn fill_interior(grid: &VoxelGrid) -> VoxelGrid {
    let [nx, ny, nz] = grid.dims;
    let mut outside: BitVec = BitVec::repeat(false, grid.len());
    let mut queue = VecDeque::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let boundary = i == 0 || j == 0 || k == 0 || i + 1 == nx || j + 1 == ny || k + 1 == nz;
                if boundary && !grid.get(i, j, k) {
                    let idx = grid.index(i, j, k);
                    outside.set(idx, true);
                    queue.push_back(idx);
                }
            }
        }
    }
    while let Some(idx) = queue.pop_front() {
        let [i, j, k] = grid.coords(idx);
        let mut visit = |i: usize, j: usize, k: usize| {
            let n = grid.index(i, j, k);
            if !outside[n] && !grid.get(i, j, k) {
                outside.set(n, true);
                queue.push_back(n);
            }
        };
        if i > 0 {
            visit(i - 1, j, k);
        }
        if i + 1 < nx {
            visit(i + 1, j, k);
        }
        if j > 0 {
            visit(i, j - 1, k);
        }
        if j + 1 < ny {
            visit(i, j + 1, k);
        }
        if k > 0 {
            visit(i, j, k - 1);
        }
        if k + 1 < nz {
            visit(i, j, k + 1);
        }
    }
    let mut out = grid.clone();
    out.occupancy = !outside;
    out
}
