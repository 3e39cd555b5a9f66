//! Unit quaternions (scalar-first) and their rotation-matrix derivatives.

use nalgebra::{Matrix3, Vector3, Vector4};
use serde::{Deserialize, Serialize};

/// Rotation stored as a scalar-first quaternion `(w, x, y, z)`.
///
/// The struct does not forcibly re-normalize on every operation: optimizer
/// updates may leave it slightly off-unit, and [`UnitQuaternion::normalize`]
/// restores `|q| = 1` to within 1e-9. [`rotation_matrix`] and the gradient
/// helpers normalize internally so they are well-defined for any nonzero
/// quaternion.
///
/// [`rotation_matrix`]: UnitQuaternion::rotation_matrix
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitQuaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitQuaternion {
    pub fn identity() -> Self {
        Self { w: 1.0, x: 0.0, y: 0.0, z: 0.0 }
    }

    /// Builds a quaternion and normalizes it. A zero quaternion falls back
    /// to the identity.
    pub fn normalized(w: f64, x: f64, y: f64, z: f64) -> Self {
        let mut q = Self { w, x, y, z };
        q.normalize();
        q
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let axis = axis.normalize();
        let (s, c) = (angle / 2.0).sin_cos();
        Self { w: c, x: s * axis.x, y: s * axis.y, z: s * axis.z }
    }

    /// Shepperd's method, stable for all rotation matrices.
    pub fn from_rotation_matrix(m: &Matrix3<f64>) -> Self {
        let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Self {
                w: 0.25 * s,
                x: (m[(2, 1)] - m[(1, 2)]) / s,
                y: (m[(0, 2)] - m[(2, 0)]) / s,
                z: (m[(1, 0)] - m[(0, 1)]) / s,
            }
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            Self {
                w: (m[(2, 1)] - m[(1, 2)]) / s,
                x: 0.25 * s,
                y: (m[(0, 1)] + m[(1, 0)]) / s,
                z: (m[(0, 2)] + m[(2, 0)]) / s,
            }
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            Self {
                w: (m[(0, 2)] - m[(2, 0)]) / s,
                x: (m[(0, 1)] + m[(1, 0)]) / s,
                y: 0.25 * s,
                z: (m[(1, 2)] + m[(2, 1)]) / s,
            }
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            Self {
                w: (m[(1, 0)] - m[(0, 1)]) / s,
                x: (m[(0, 2)] + m[(2, 0)]) / s,
                y: (m[(1, 2)] + m[(2, 1)]) / s,
                z: 0.25 * s,
            }
        };
        q.normalized_copy()
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n <= f64::EPSILON {
            *self = Self::identity();
        } else {
            self.w /= n;
            self.x /= n;
            self.y /= n;
            self.z /= n;
        }
    }

    pub fn normalized_copy(&self) -> Self {
        let mut q = *self;
        q.normalize();
        q
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.w, self.x, self.y, self.z)
    }

    /// Rotation matrix of the normalized quaternion.
    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        let q = self.normalized_copy();
        let (w, x, y, z) = (q.w, q.x, q.y, q.z);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation_matrix() * v
    }

    pub fn conjugate(&self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Spherical linear interpolation along the shorter arc.
    pub fn slerp(&self, other: &Self, t: f64) -> Self {
        let a = self.normalized_copy();
        let mut b = other.normalized_copy();
        let mut cos_omega = a.dot(&b);
        if cos_omega < 0.0 {
            b = Self { w: -b.w, x: -b.x, y: -b.y, z: -b.z };
            cos_omega = -cos_omega;
        }
        let (ka, kb) = if cos_omega > 1.0 - 1e-10 {
            (1.0 - t, t)
        } else {
            let omega = cos_omega.clamp(-1.0, 1.0).acos();
            let sin_omega = omega.sin();
            (((1.0 - t) * omega).sin() / sin_omega, (t * omega).sin() / sin_omega)
        };
        Self::normalized(
            ka * a.w + kb * b.w,
            ka * a.x + kb * b.x,
            ka * a.y + kb * b.y,
            ka * a.z + kb * b.z,
        )
    }

    /// Partials of the rotation matrix with respect to the raw components
    /// of a **unit** quaternion, i.e. before accounting for normalization.
    pub fn rotation_matrix_partials(&self) -> [Matrix3<f64>; 4] {
        let q = self.normalized_copy();
        let (w, x, y, z) = (q.w, q.x, q.y, q.z);
        let dw = Matrix3::new(
            0.0, -2.0 * z, 2.0 * y,
            2.0 * z, 0.0, -2.0 * x,
            -2.0 * y, 2.0 * x, 0.0,
        );
        let dx = Matrix3::new(
            0.0, 2.0 * y, 2.0 * z,
            2.0 * y, -4.0 * x, -2.0 * w,
            2.0 * z, 2.0 * w, -4.0 * x,
        );
        let dy = Matrix3::new(
            -4.0 * y, 2.0 * x, 2.0 * w,
            2.0 * x, 0.0, 2.0 * z,
            -2.0 * w, 2.0 * z, -4.0 * y,
        );
        let dz = Matrix3::new(
            -4.0 * z, -2.0 * w, 2.0 * x,
            2.0 * w, -4.0 * z, 2.0 * y,
            2.0 * x, 2.0 * y, 0.0,
        );
        [dw, dx, dy, dz]
    }

    /// Pulls a gradient with respect to the rotation matrix back to the raw
    /// stored components, including the normalization step `q -> q/|q|`.
    pub fn backprop_rotation_gradient(&self, d_rotation_matrix: &Matrix3<f64>) -> Vector4<f64> {
        let partials = self.rotation_matrix_partials();
        let mut d_unit = Vector4::zeros();
        for k in 0..4 {
            d_unit[k] = d_rotation_matrix.component_mul(&partials[k]).sum();
        }
        // d(q/|q|)/dq = (I - u u^T) / |q| with u the normalized quaternion.
        let n = self.norm().max(f64::EPSILON);
        let u = self.normalized_copy().as_vector();
        (d_unit - u * u.dot(&d_unit)) / n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn normalize_restores_unit_norm() {
        let mut q = UnitQuaternion { w: 3.0, x: -1.0, y: 0.5, z: 2.0 };
        q.normalize();
        assert!((q.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rotation_matrix_is_orthonormal() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..100 {
            let q = UnitQuaternion::normalized(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let r = q.rotation_matrix();
            assert_relative_eq!(r * r.transpose(), Matrix3::identity(), epsilon = 1e-12);
            assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn matrix_roundtrip() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..100 {
            let q = UnitQuaternion::normalized(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let q2 = UnitQuaternion::from_rotation_matrix(&q.rotation_matrix());
            // q and -q encode the same rotation.
            let sign = if q.dot(&q2) < 0.0 { -1.0 } else { 1.0 };
            assert_relative_eq!(q.w, sign * q2.w, epsilon = 1e-9);
            assert_relative_eq!(q.x, sign * q2.x, epsilon = 1e-9);
            assert_relative_eq!(q.y, sign * q2.y, epsilon = 1e-9);
            assert_relative_eq!(q.z, sign * q2.z, epsilon = 1e-9);
        }
    }

    #[test]
    fn rotation_matrix_partials_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let h = 1e-6;
        for _ in 0..20 {
            let q = UnitQuaternion::normalized(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            // Random scalar function of R to probe the full chain through
            // normalization: f(q) = sum(W .* R(q/|q|)).
            let w = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let analytic = q.backprop_rotation_gradient(&w);
            let mut comps = [q.w, q.x, q.y, q.z];
            for k in 0..4 {
                let orig = comps[k];
                comps[k] = orig + h;
                let qp = UnitQuaternion { w: comps[0], x: comps[1], y: comps[2], z: comps[3] };
                let fp = w.component_mul(&qp.rotation_matrix()).sum();
                comps[k] = orig - h;
                let qm = UnitQuaternion { w: comps[0], x: comps[1], y: comps[2], z: comps[3] };
                let fm = w.component_mul(&qm.rotation_matrix()).sum();
                comps[k] = orig;
                let fd = (fp - fm) / (2.0 * h);
                assert_relative_eq!(analytic[k], fd, epsilon = 1e-6, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn slerp_endpoints_and_midpoint() {
        let a = UnitQuaternion::identity();
        let b = UnitQuaternion::from_axis_angle(Vector3::z(), 1.0);
        let s0 = a.slerp(&b, 0.0);
        let s1 = a.slerp(&b, 1.0);
        let sm = a.slerp(&b, 0.5);
        assert_relative_eq!(s0.dot(&a).abs(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(s1.dot(&b).abs(), 1.0, epsilon = 1e-12);
        let mid = UnitQuaternion::from_axis_angle(Vector3::z(), 0.5);
        assert_relative_eq!(sm.dot(&mid).abs(), 1.0, epsilon = 1e-12);
    }
}
