//! Geometry and shading primitives: rotations, poses, projection,
//! covariance construction, spherical-harmonics color evaluation.
//!
//! All operations are pure functions in 64-bit floats and safe to call
//! concurrently.

mod camera;
mod projection;
mod quaternion;
mod sh;

pub use camera::CameraView;
pub use projection::{project_gaussian, project_point, ProjectedGaussian, ProjectionError, COV2D_REGULARIZER, NEAR_PLANE};
pub use quaternion::UnitQuaternion;
pub use sh::{eval_sh, eval_sh_with_grad, sh_coeff_count, SHCoefficients, SH_C0};

use nalgebra::{Matrix3, Vector3};

/// Covariance of an anisotropic Gaussian from its per-axis scales and
/// orientation: `R * diag(s^2) * R^T`. Symmetric positive semi-definite by
/// construction; eigenvalues equal the squared scales.
pub fn covariance_from_factors(scale: Vector3<f64>, rotation: &UnitQuaternion) -> Matrix3<f64> {
    let r = rotation.rotation_matrix();
    let d = Matrix3::from_diagonal(&scale.component_mul(&scale));
    r * d * r.transpose()
}

/// Logistic sigmoid, used as the opacity activation.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Inverse sigmoid; input clamped away from {0, 1}.
#[inline]
pub fn inverse_sigmoid(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}
