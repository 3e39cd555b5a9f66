//! Real spherical-harmonics color evaluation up to degree 3, with partial
//! derivatives of the basis for the backward pass.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

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

pub const MAX_SH_DEGREE: usize = 3;

/// Coefficients per channel for degrees `0..=degree`.
#[inline]
pub fn sh_coeff_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Per-splat view-dependent color coefficients.
///
/// Layout: `coeffs[k]` is the RGB triple for basis function `k`, ordered by
/// degree then order, `k in 0..(degree+1)^2`. `coeffs[0]` is the DC term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SHCoefficients {
    pub coeffs: Vec<[f64; 3]>,
}

impl SHCoefficients {
    pub fn zeros(degree: usize) -> Self {
        Self { coeffs: vec![[0.0; 3]; sh_coeff_count(degree)] }
    }

    /// DC-only coefficients reproducing `rgb` from any direction.
    pub fn from_rgb(rgb: [f64; 3], degree: usize) -> Self {
        let mut sh = Self::zeros(degree);
        for c in 0..3 {
            sh.coeffs[0][c] = (rgb[c] - 0.5) / SH_C0;
        }
        sh
    }

    pub fn degree(&self) -> usize {
        match self.coeffs.len() {
            1 => 0,
            4 => 1,
            9 => 2,
            16 => 3,
            n => panic!("invalid SH coefficient count {n}"),
        }
    }
}

/// Basis values for a unit direction, up to `degree`.
pub fn sh_basis(degree: usize, dir: &Vector3<f64>) -> Vec<f64> {
    let (x, y, z) = (dir.x, dir.y, dir.z);
    let mut b = Vec::with_capacity(sh_coeff_count(degree));
    b.push(SH_C0);
    if degree >= 1 {
        b.push(-SH_C1 * y);
        b.push(SH_C1 * z);
        b.push(-SH_C1 * x);
    }
    if degree >= 2 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        b.push(SH_C2[0] * x * y);
        b.push(SH_C2[1] * y * z);
        b.push(SH_C2[2] * (2.0 * zz - xx - yy));
        b.push(SH_C2[3] * x * z);
        b.push(SH_C2[4] * (xx - yy));
    }
    if degree >= 3 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        b.push(SH_C3[0] * y * (3.0 * xx - yy));
        b.push(SH_C3[1] * x * y * z);
        b.push(SH_C3[2] * y * (4.0 * zz - xx - yy));
        b.push(SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy));
        b.push(SH_C3[4] * x * (4.0 * zz - xx - yy));
        b.push(SH_C3[5] * z * (xx - yy));
        b.push(SH_C3[6] * x * (xx - 3.0 * yy));
    }
    b
}

/// Partials `d basis_k / d dir` for a unit direction.
pub fn sh_basis_partials(degree: usize, dir: &Vector3<f64>) -> Vec<Vector3<f64>> {
    let (x, y, z) = (dir.x, dir.y, dir.z);
    let mut g = Vec::with_capacity(sh_coeff_count(degree));
    g.push(Vector3::zeros());
    if degree >= 1 {
        g.push(Vector3::new(0.0, -SH_C1, 0.0));
        g.push(Vector3::new(0.0, 0.0, SH_C1));
        g.push(Vector3::new(-SH_C1, 0.0, 0.0));
    }
    if degree >= 2 {
        g.push(Vector3::new(SH_C2[0] * y, SH_C2[0] * x, 0.0));
        g.push(Vector3::new(0.0, SH_C2[1] * z, SH_C2[1] * y));
        g.push(Vector3::new(-2.0 * SH_C2[2] * x, -2.0 * SH_C2[2] * y, 4.0 * SH_C2[2] * z));
        g.push(Vector3::new(SH_C2[3] * z, 0.0, SH_C2[3] * x));
        g.push(Vector3::new(2.0 * SH_C2[4] * x, -2.0 * SH_C2[4] * y, 0.0));
    }
    if degree >= 3 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        g.push(Vector3::new(6.0 * SH_C3[0] * x * y, SH_C3[0] * (3.0 * xx - 3.0 * yy), 0.0));
        g.push(Vector3::new(SH_C3[1] * y * z, SH_C3[1] * x * z, SH_C3[1] * x * y));
        g.push(Vector3::new(
            -2.0 * SH_C3[2] * x * y,
            SH_C3[2] * (4.0 * zz - xx - 3.0 * yy),
            8.0 * SH_C3[2] * y * z,
        ));
        g.push(Vector3::new(
            -6.0 * SH_C3[3] * x * z,
            -6.0 * SH_C3[3] * y * z,
            SH_C3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy),
        ));
        g.push(Vector3::new(
            SH_C3[4] * (4.0 * zz - 3.0 * xx - yy),
            -2.0 * SH_C3[4] * x * y,
            8.0 * SH_C3[4] * x * z,
        ));
        g.push(Vector3::new(2.0 * SH_C3[5] * x * z, -2.0 * SH_C3[5] * y * z, SH_C3[5] * (xx - yy)));
        g.push(Vector3::new(SH_C3[6] * (3.0 * xx - 3.0 * yy), -6.0 * SH_C3[6] * x * y, 0.0));
    }
    g
}

/// View-dependent color: `max(0, sum_k coeffs_k * basis_k(dir) + 0.5)`.
pub fn eval_sh(coeffs: &SHCoefficients, view_dir: &Vector3<f64>) -> [f64; 3] {
    let basis = sh_basis(coeffs.degree(), view_dir);
    let mut rgb = [0.5; 3];
    for (k, b) in basis.iter().enumerate() {
        for c in 0..3 {
            rgb[c] += coeffs.coeffs[k][c] * b;
        }
    }
    for v in rgb.iter_mut() {
        *v = v.max(0.0);
    }
    rgb
}

/// Forward color plus everything the backward pass needs: the basis values,
/// the basis partials per direction component, and the clamp gates.
pub struct ShEval {
    pub rgb: [f64; 3],
    pub basis: Vec<f64>,
    pub basis_partials: Vec<Vector3<f64>>,
    /// False where the `max(0, ·)` clamp is active (gradient blocked).
    pub active: [bool; 3],
}

pub fn eval_sh_with_grad(coeffs: &SHCoefficients, view_dir: &Vector3<f64>) -> ShEval {
    let degree = coeffs.degree();
    let basis = sh_basis(degree, view_dir);
    let basis_partials = sh_basis_partials(degree, view_dir);
    let mut rgb = [0.5; 3];
    for (k, b) in basis.iter().enumerate() {
        for c in 0..3 {
            rgb[c] += coeffs.coeffs[k][c] * b;
        }
    }
    let mut active = [true; 3];
    for c in 0..3 {
        if rgb[c] <= 0.0 {
            rgb[c] = 0.0;
            active[c] = false;
        }
    }
    ShEval { rgb, basis, basis_partials, active }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_dir(rng: &mut ChaCha12Rng) -> Vector3<f64> {
        loop {
            let v = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 1e-3 {
                return v / n;
            }
        }
    }

    /// Independent basis oracle: associated Legendre polynomials (with
    /// Condon-Shortley phase) combined in spherical coordinates as
    /// `K_lm * P_lm(cos theta) * {cos,sin}(m phi)`.
    fn sh_basis_oracle(degree: usize, dir: &Vector3<f64>) -> Vec<f64> {
        let ct = dir.z;
        let st = (1.0 - ct * ct).max(0.0).sqrt();
        let phi = dir.y.atan2(dir.x);
        let pi = std::f64::consts::PI;
        let k = |l: i32, m: i32| -> f64 {
            let fact = |n: i32| -> f64 { (1..=n).map(|v| v as f64).product() };
            ((2.0 * l as f64 + 1.0) / (4.0 * pi) * fact(l - m) / fact(l + m)).sqrt()
        };
        // P_l^m(cos theta) with Condon-Shortley phase, explicit through l=3.
        let p = |l: i32, m: i32| -> f64 {
            match (l, m) {
                (0, 0) => 1.0,
                (1, 0) => ct,
                (1, 1) => -st,
                (2, 0) => 0.5 * (3.0 * ct * ct - 1.0),
                (2, 1) => -3.0 * ct * st,
                (2, 2) => 3.0 * st * st,
                (3, 0) => 0.5 * (5.0 * ct * ct * ct - 3.0 * ct),
                (3, 1) => -1.5 * (5.0 * ct * ct - 1.0) * st,
                (3, 2) => 15.0 * ct * st * st,
                (3, 3) => -15.0 * st * st * st,
                _ => unreachable!(),
            }
        };
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut out = Vec::new();
        for l in 0..=(degree as i32) {
            for m in -l..=l {
                let v = if m == 0 {
                    k(l, 0) * p(l, 0)
                } else if m > 0 {
                    sqrt2 * k(l, m) * (m as f64 * phi).cos() * p(l, m)
                } else {
                    sqrt2 * k(l, -m) * ((-m) as f64 * phi).sin() * p(l, -m)
                };
                out.push(v);
            }
        }
        out
    }

    #[test]
    fn basis_matches_independent_table() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..200 {
            let dir = random_dir(&mut rng);
            let ours = sh_basis(3, &dir);
            let oracle = sh_basis_oracle(3, &dir);
            assert_eq!(ours.len(), oracle.len());
            for (k, (a, b)) in ours.iter().zip(oracle.iter()).enumerate() {
                assert_relative_eq!(a, b, epsilon = 1e-12, max_relative = 1e-10);
                let _ = k;
            }
        }
    }

    #[test]
    fn dc_only_is_direction_independent() {
        let sh = SHCoefficients::from_rgb([1.0, 0.0, 0.0], 0);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..50 {
            let rgb = eval_sh(&sh, &random_dir(&mut rng));
            assert_eq!(rgb[0], eval_sh(&sh, &Vector3::z())[0]);
            assert_relative_eq!(rgb[0], 1.0, epsilon = 1e-12);
            assert_relative_eq!(rgb[1], 0.0, epsilon = 1e-12);
            assert_relative_eq!(rgb[2], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_coefficients_give_half_gray() {
        let sh = SHCoefficients::zeros(2);
        let rgb = eval_sh(&sh, &Vector3::new(0.0, 1.0, 0.0));
        assert_eq!(rgb, [0.5, 0.5, 0.5]);
    }

    #[test]
    fn antipodal_directions_differ_with_odd_bands() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let mut sh = SHCoefficients::zeros(3);
        for k in 0..sh.coeffs.len() {
            for c in 0..3 {
                sh.coeffs[k][c] = rng.gen_range(-0.2..0.2);
            }
        }
        let dir = random_dir(&mut rng);
        let a = eval_sh(&sh, &dir);
        let b = eval_sh(&sh, &(-dir));
        assert!((a[0] - b[0]).abs() > 1e-6 || (a[1] - b[1]).abs() > 1e-6 || (a[2] - b[2]).abs() > 1e-6);

        // With odd-degree bands zeroed the evaluation is even in the direction.
        for l in [1usize, 3] {
            let lo = l * l;
            let hi = (l + 1) * (l + 1);
            for k in lo..hi {
                sh.coeffs[k] = [0.0; 3];
            }
        }
        let a = eval_sh(&sh, &dir);
        let b = eval_sh(&sh, &(-dir));
        for c in 0..3 {
            assert_relative_eq!(a[c], b[c], epsilon = 1e-12);
        }
    }

    #[test]
    fn degree_one_rotation_equivariance() {
        // Rotating both the view direction and the linear band (as the
        // cartesian vector it encodes) leaves the color unchanged.
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for _ in 0..50 {
            let mut sh = SHCoefficients::zeros(1);
            for k in 0..4 {
                for c in 0..3 {
                    sh.coeffs[k][c] = rng.gen_range(-0.3..0.3);
                }
            }
            let rot = crate::math::UnitQuaternion::normalized(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let r = rot.rotation_matrix();
            let dir = random_dir(&mut rng);
            let before = eval_sh(&sh, &dir);

            // The degree-1 band encodes w . dir with w = (-c1*m1, -c1*mm1, c1*m0)
            // per channel; rotate w and map back to coefficients.
            let mut rotated = sh.clone();
            for c in 0..3 {
                let w = Vector3::new(-sh.coeffs[3][c], -sh.coeffs[1][c], sh.coeffs[2][c]);
                let wr = r * w;
                rotated.coeffs[3][c] = -wr.x;
                rotated.coeffs[1][c] = -wr.y;
                rotated.coeffs[2][c] = wr.z;
            }
            let after = eval_sh(&rotated, &(r * dir));
            for c in 0..3 {
                assert_relative_eq!(before[c], after[c], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn basis_partials_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        let h = 1e-6;
        for _ in 0..20 {
            let dir = random_dir(&mut rng);
            let grads = sh_basis_partials(3, &dir);
            for axis in 0..3 {
                let mut dp = dir;
                dp[axis] += h;
                let mut dm = dir;
                dm[axis] -= h;
                // Raw polynomial partials (no re-normalization of dir).
                let bp = sh_basis(3, &dp);
                let bm = sh_basis(3, &dm);
                for k in 0..16 {
                    let fd = (bp[k] - bm[k]) / (2.0 * h);
                    assert_relative_eq!(grads[k][axis], fd, epsilon = 1e-6, max_relative = 1e-5);
                }
            }
        }
    }
}
