//! Per-tet Neo-Hookean constraint pair and its XPBD projection.

use crate::{Mat3, Vec3};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Rest data and compliances of one tet.
#[derive(Debug, Clone, Copy)]
pub struct TetParams {
    pub inv_basis: Mat3,
    /// `1 / (μ_L · V)`, or infinity to disable.
    pub deviatoric_compliance: f64,
    /// `1 / (λ_L · V)`, or infinity to disable.
    pub hydrostatic_compliance: f64,
}

pub fn gradient(x: &[Vec3; 4], inv_basis: &Mat3) -> Mat3 {
    Mat3::from_columns(&[x[1] - x[0], x[2] - x[0], x[3] - x[0]]) * inv_basis
}

/// `(C_D, C_H)` at the current positions.
pub fn constraint_values(x: &[Vec3; 4], inv_basis: &Mat3) -> (f64, f64) {
    let f = gradient(x, inv_basis);
    (f.norm() - SQRT3, f.determinant() - 1.0)
}

/// Vertex gradients from `∂C/∂F`.
fn vertex_gradients(dc_df: &Mat3, inv_basis: &Mat3) -> [Vec3; 4] {
    let g = dc_df * inv_basis.transpose();
    let (g1, g2, g3): (Vec3, Vec3, Vec3) =
        (g.column(0).into(), g.column(1).into(), g.column(2).into());
    [-(g1 + g2 + g3), g1, g2, g3]
}

/// One XPBD update of a single scalar constraint. Returns `false` when the
/// update is not finite.
fn apply(
    x: &mut [Vec3; 4],
    w: &[f64; 4],
    c: f64,
    grads: &[Vec3; 4],
    alpha_tilde: f64,
    lambda: &mut f64,
) -> bool {
    let denom: f64 = (0..4).map(|i| w[i] * grads[i].norm_squared()).sum::<f64>() + alpha_tilde;
    if denom <= 1e-30 {
        return true;
    }
    let dl = (-c - alpha_tilde * *lambda) / denom;
    if !dl.is_finite() {
        return false;
    }
    *lambda += dl;
    for i in 0..4 {
        x[i] += grads[i] * (w[i] * dl);
    }
    true
}

/// Projects the deviatoric then the hydrostatic constraint of one tet.
pub fn project_tet(
    x: &mut [Vec3; 4],
    w: &[f64; 4],
    p: &TetParams,
    inv_dt2: f64,
    lambda: &mut [f64; 2],
) -> bool {
    if w.iter().all(|&wi| wi == 0.0) {
        return true;
    }
    if p.deviatoric_compliance.is_finite() {
        let f = gradient(x, &p.inv_basis);
        let r = f.norm();
        if r > 1e-12 {
            let grads = vertex_gradients(&(f / r), &p.inv_basis);
            let at = p.deviatoric_compliance * inv_dt2;
            if !apply(x, w, r - SQRT3, &grads, at, &mut lambda[0]) {
                return false;
            }
        }
    }
    if p.hydrostatic_compliance.is_finite() {
        let f = gradient(x, &p.inv_basis);
        let (f0, f1, f2): (Vec3, Vec3, Vec3) =
            (f.column(0).into(), f.column(1).into(), f.column(2).into());
        let cof = Mat3::from_columns(&[f1.cross(&f2), f2.cross(&f0), f0.cross(&f1)]);
        let grads = vertex_gradients(&cof, &p.inv_basis);
        let at = p.hydrostatic_compliance * inv_dt2;
        if !apply(x, w, f.determinant() - 1.0, &grads, at, &mut lambda[1]) {
            return false;
        }
    }
    x.iter().all(|v| v.iter().all(|c| c.is_finite()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::edge_basis;

    fn unit_tet() -> [Vec3; 4] {
        [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()]
    }

    /// Central finite differences of a scalar function of the 4 positions.
    fn fd_grad(x: &[Vec3; 4], f: impl Fn(&[Vec3; 4]) -> f64) -> [Vec3; 4] {
        let h = 1e-6;
        std::array::from_fn(|i| {
            Vec3::from_fn(|a, _| {
                let mut p = *x;
                let mut m = *x;
                p[i][a] += h;
                m[i][a] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
        })
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let rest = unit_tet();
        let inv = edge_basis(&rest).try_inverse().unwrap();
        let x = [
            Vec3::new(0.1, -0.05, 0.02),
            Vec3::new(1.3, 0.1, -0.2),
            Vec3::new(0.2, 0.9, 0.1),
            Vec3::new(-0.1, 0.3, 1.4),
        ];
        let f = gradient(&x, &inv);
        let dev = vertex_gradients(&(f / f.norm()), &inv);
        let fd = fd_grad(&x, |p| constraint_values(p, &inv).0);
        for i in 0..4 {
            assert!((dev[i] - fd[i]).norm() < 1e-6);
        }
        let (f0, f1, f2): (Vec3, Vec3, Vec3) =
            (f.column(0).into(), f.column(1).into(), f.column(2).into());
        let cof = Mat3::from_columns(&[f1.cross(&f2), f2.cross(&f0), f0.cross(&f1)]);
        let hyd = vertex_gradients(&cof, &inv);
        let fd = fd_grad(&x, |p| constraint_values(p, &inv).1);
        for i in 0..4 {
            assert!((hyd[i] - fd[i]).norm() < 1e-6);
        }
    }

    #[test]
    fn rest_shape_is_a_fixed_point() {
        let rest = unit_tet();
        let p = TetParams {
            inv_basis: edge_basis(&rest).try_inverse().unwrap(),
            deviatoric_compliance: 1e-3,
            hydrostatic_compliance: 1e-3,
        };
        let mut x = rest;
        let mut l = [0.0; 2];
        assert!(project_tet(&mut x, &[1.0; 4], &p, 1e8, &mut l));
        assert_eq!(x, rest);
    }

    #[test]
    fn hard_constraints_drive_residual_down() {
        let rest = unit_tet();
        let p = TetParams {
            inv_basis: edge_basis(&rest).try_inverse().unwrap(),
            deviatoric_compliance: 0.0,
            hydrostatic_compliance: 0.0,
        };
        let mut x = rest.map(|v| v * 1.2);
        let norm = |x: &[Vec3; 4]| {
            let (cd, ch) = constraint_values(x, &p.inv_basis);
            cd.hypot(ch)
        };
        let before = norm(&x);
        for _ in 0..50 {
            let mut l = [0.0; 2];
            project_tet(&mut x, &[1.0; 4], &p, 1.0, &mut l);
        }
        assert!(norm(&x) < 0.02 * before);
    }
}
