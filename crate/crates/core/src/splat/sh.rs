//! Real spherical harmonics up to degree 3.

use crate::Vec3;

/// Coefficients per channel for degree 3.
pub const SH_COEFFS: usize = 16;

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
const SH_C1: f64 = 0.488_602_511_902_919_9;
const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Basis values `Y_{l,m}(dir)` in asset coefficient order.
fn basis(dir: &Vec3, degree: usize) -> [f64; SH_COEFFS] {
    let mut y = [0.0; SH_COEFFS];
    y[0] = SH_C0;
    if degree == 0 {
        return y;
    }
    let (x, yy_, z) = (dir.x, dir.y, dir.z);
    y[1] = -SH_C1 * yy_;
    y[2] = SH_C1 * z;
    y[3] = -SH_C1 * x;
    if degree == 1 {
        return y;
    }
    let (xx, yy, zz) = (x * x, yy_ * yy_, z * z);
    let (xy, yz, xz) = (x * yy_, yy_ * z, x * z);
    y[4] = SH_C2[0] * xy;
    y[5] = SH_C2[1] * yz;
    y[6] = SH_C2[2] * (2.0 * zz - xx - yy);
    y[7] = SH_C2[3] * xz;
    y[8] = SH_C2[4] * (xx - yy);
    if degree == 2 {
        return y;
    }
    y[9] = SH_C3[0] * yy_ * (3.0 * xx - yy);
    y[10] = SH_C3[1] * xy * z;
    y[11] = SH_C3[2] * yy_ * (4.0 * zz - xx - yy);
    y[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    y[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
    y[14] = SH_C3[5] * z * (xx - yy);
    y[15] = SH_C3[6] * x * (xx - 3.0 * yy);
    y
}

/// View-dependent color: `clamp(Σ c·Y(dir) + 0.5, 0, 1)` per channel.
///
/// `degree` is clamped to 3.
pub fn eval_sh(sh: &[[f64; SH_COEFFS]; 3], view_dir: &Vec3, degree: usize) -> [f64; 3] {
    let degree = degree.min(3);
    let y = basis(view_dir, degree);
    let n = (degree + 1) * (degree + 1);
    let mut rgb = [0.0; 3];
    for (c, out) in rgb.iter_mut().enumerate() {
        let v: f64 = (0..n).map(|k| sh[c][k] * y[k]).sum();
        *out = (v + 0.5).clamp(0.0, 1.0);
    }
    rgb
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dir(rng: &mut ChaCha8Rng) -> Vec3 {
        loop {
            let v = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                return v / n;
            }
        }
    }

    #[test]
    fn zero_coefficients_give_offset() {
        let sh = [[0.0; SH_COEFFS]; 3];
        assert_eq!(eval_sh(&sh, &Vec3::z(), 3), [0.5; 3]);
    }

    #[test]
    fn degree_zero_is_dc_times_constant() {
        let mut sh = [[0.0; SH_COEFFS]; 3];
        sh[0][0] = 1.0;
        sh[1][0] = -0.7;
        sh[2][0] = 0.3;
        let rgb = eval_sh(&sh, &Vec3::x(), 0);
        assert!((rgb[0] - (0.28209479 * 1.0 + 0.5)).abs() < 1e-8);
        assert!((rgb[1] - (0.28209479 * -0.7 + 0.5)).abs() < 1e-8);
        assert!((rgb[2] - (0.28209479 * 0.3 + 0.5)).abs() < 1e-8);
    }

    #[test]
    fn degree_zero_constant_over_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut sh = [[0.0; SH_COEFFS]; 3];
        for ch in sh.iter_mut() {
            for c in ch.iter_mut() {
                *c = rng.random_range(-1.0..1.0);
            }
        }
        let reference = eval_sh(&sh, &Vec3::z(), 0);
        for _ in 0..100 {
            assert_eq!(eval_sh(&sh, &random_dir(&mut rng), 0), reference);
        }
    }

    #[test]
    fn basis_is_orthonormal_under_quadrature() {
        // Monte Carlo estimate of ∫ Y_i Y_j over the sphere, scaled to 4π.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples = 200_000;
        let mut gram = [[0.0f64; SH_COEFFS]; SH_COEFFS];
        for _ in 0..samples {
            let y = basis(&random_dir(&mut rng), 3);
            for i in 0..SH_COEFFS {
                for j in 0..SH_COEFFS {
                    gram[i][j] += y[i] * y[j];
                }
            }
        }
        let scale = 4.0 * std::f64::consts::PI / samples as f64;
        for i in 0..SH_COEFFS {
            for j in 0..SH_COEFFS {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i][j] * scale - want).abs() < 0.03, "({i},{j})");
            }
        }
    }
}
