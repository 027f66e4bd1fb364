//! Small linear-algebra helpers shared by the geometry modules.

use nalgebra::{Quaternion, UnitQuaternion};

use crate::{Mat3, Vec3};

/// Signed volume of the tetrahedron `(a, b, c, d)`.
pub fn tet_signed_volume(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).dot(&(c - a).cross(&(d - a))) / 6.0
}

/// Edge matrix `[x1 - x0, x2 - x0, x3 - x0]`.
pub fn edge_basis(x: &[Vec3; 4]) -> Mat3 {
    Mat3::from_columns(&[x[1] - x[0], x[2] - x[0], x[3] - x[0]])
}

/// Barycentric coordinates of `p` with respect to the tet `x`.
///
/// Returns `None` if the tet is degenerate.
pub fn barycentric(x: &[Vec3; 4], p: &Vec3) -> Option<[f64; 4]> {
    let inv = edge_basis(x).try_inverse()?;
    Some(barycentric_with_inverse(&x[0], &inv, p))
}

/// Barycentric coordinates using a precomputed inverse edge basis.
pub fn barycentric_with_inverse(x0: &Vec3, inv_basis: &Mat3, p: &Vec3) -> [f64; 4] {
    let l = inv_basis * (p - x0);
    [1.0 - l.x - l.y - l.z, l.x, l.y, l.z]
}

/// Symmetric 3×3 matrix stored as `[xx, xy, xz, yy, yz, zz]`.
pub fn sym_to_array(m: &Mat3) -> [f64; 6] {
    [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 1)], m[(1, 2)], m[(2, 2)]]
}

pub fn sym_from_array(a: &[f64; 6]) -> Mat3 {
    Mat3::new(a[0], a[1], a[2], a[1], a[3], a[4], a[2], a[4], a[5])
}

/// `(m + mᵀ) / 2`, which is exactly symmetric in floating point.
pub fn symmetrize(m: &Mat3) -> Mat3 {
    let mut s = *m;
    for i in 0..3 {
        for j in (i + 1)..3 {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// Rotation factor of the polar decomposition `F = R S`.
///
/// Uses the SVD and flips the smallest singular direction when needed so the
/// result is a proper rotation.
pub fn polar_rotation(f: &Mat3) -> Mat3 {
    let svd = f.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Mat3::identity();
    };
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        let mut smallest = 0;
        for i in 1..3 {
            if svd.singular_values[i] < svd.singular_values[smallest] {
                smallest = i;
            }
        }
        u.column_mut(smallest).neg_mut();
        r = u * v_t;
    }
    r
}

/// Largest singular value of `m`.
pub fn max_singular_value(m: &Mat3) -> f64 {
    m.singular_values().max()
}

/// Quaternion in `(w, x, y, z)` order as a unit rotation.
pub fn quat_wxyz(q: [f64; 4]) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(Quaternion::new(q[0], q[1], q[2], q[3]))
}

/// Rotation from an orthonormal frame, returning `(w, x, y, z)`.
pub fn rotation_to_wxyz(r: &Mat3) -> [f64; 4] {
    let rot = nalgebra::Rotation3::from_matrix_unchecked(*r);
    let q = UnitQuaternion::from_rotation_matrix(&rot);
    [q.w, q.i, q.j, q.k]
}
