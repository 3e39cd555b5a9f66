//! Perspective projection of 3D Gaussians to screen space (EWA first-order
//! approximation) and the matching gradient chain.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};
use thiserror::Error;

use super::CameraView;

/// Points closer than this camera-space depth are culled.
pub const NEAR_PLANE: f64 = 0.01;

/// Low-pass regularizer added to the projected 2D covariance, pixel units.
pub const COV2D_REGULARIZER: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ProjectionError {
    #[error("point is behind the camera near plane")]
    BehindCamera,
}

/// Screen-space footprint of a projected Gaussian.
#[derive(Debug, Clone)]
pub struct ProjectedGaussian {
    pub mean2d: Vector2<f64>,
    /// Regularized 2D covariance (symmetric).
    pub cov2d: Matrix2<f64>,
    /// Camera-space depth (z).
    pub depth: f64,
    /// Camera-space position, kept for the backward pass.
    pub mean_cam: Vector3<f64>,
}

/// Pinhole projection of a camera-space point.
#[inline]
pub fn project_point(view: &CameraView, p_cam: &Vector3<f64>) -> Vector2<f64> {
    Vector2::new(
        view.fx * p_cam.x / p_cam.z + view.cx,
        view.fy * p_cam.y / p_cam.z + view.cy,
    )
}

/// Jacobian of the pinhole projection at a camera-space point.
#[inline]
pub fn perspective_jacobian(view: &CameraView, p_cam: &Vector3<f64>) -> Matrix2x3<f64> {
    let (x, y, z) = (p_cam.x, p_cam.y, p_cam.z);
    let zi = 1.0 / z;
    let zi2 = zi * zi;
    Matrix2x3::new(
        view.fx * zi, 0.0, -view.fx * x * zi2,
        0.0, view.fy * zi, -view.fy * y * zi2,
    )
}

/// Projects a world-space Gaussian `(mean, cov3d)` into screen space:
/// `cov2d = J W cov3d W^T J^T + 0.3 I` with `J` the perspective Jacobian and
/// `W` the world-to-camera rotation.
pub fn project_gaussian(
    mean: &Vector3<f64>,
    cov3d: &Matrix3<f64>,
    view: &CameraView,
) -> Result<ProjectedGaussian, ProjectionError> {
    let w = view.world_to_camera();
    let mean_cam = w * mean + view.translation;
    if mean_cam.z <= NEAR_PLANE {
        return Err(ProjectionError::BehindCamera);
    }
    let j = perspective_jacobian(view, &mean_cam);
    let a = j * w;
    let mut cov2d = a * cov3d * a.transpose();
    cov2d[(0, 0)] += COV2D_REGULARIZER;
    cov2d[(1, 1)] += COV2D_REGULARIZER;
    Ok(ProjectedGaussian {
        mean2d: project_point(view, &mean_cam),
        cov2d,
        depth: mean_cam.z,
        mean_cam,
    })
}

/// Gradient chain from screen space back to the camera-space mean and the
/// 3D covariance.
///
/// Inputs are full-matrix gradients: `d_mean2d` of the projected center and
/// `d_cov2d` of the (pre-symmetrized) 2D covariance. Output `d_mean_cam`
/// includes both the projection of the center and the dependence of the
/// Jacobian `J` on the camera-space position; `d_cov3d` is the full-matrix
/// gradient with respect to the world-space covariance.
pub struct ProjectionBackward {
    pub d_mean_cam: Vector3<f64>,
    pub d_cov3d: Matrix3<f64>,
}

pub fn project_gaussian_backward(
    view: &CameraView,
    mean_cam: &Vector3<f64>,
    cov3d: &Matrix3<f64>,
    d_mean2d: &Vector2<f64>,
    d_cov2d: &Matrix2<f64>,
) -> ProjectionBackward {
    let w = view.world_to_camera();
    let j = perspective_jacobian(view, mean_cam);
    let a = j * w;

    // cov2d = A cov3d A^T  =>  d_cov3d = A^T d_cov2d A,
    //                          d_A = d_cov2d A cov3d^T + d_cov2d^T A cov3d.
    let d_cov3d = a.transpose() * d_cov2d * a;
    let d_a = d_cov2d * a * cov3d.transpose() + d_cov2d.transpose() * a * cov3d;
    // A = J W  =>  d_J = d_A W^T.
    let d_j = d_a * w.transpose();

    // Nonzero partials of J with respect to the camera-space point.
    let (x, y, z) = (mean_cam.x, mean_cam.y, mean_cam.z);
    let zi = 1.0 / z;
    let zi2 = zi * zi;
    let zi3 = zi2 * zi;
    let mut d_mean_cam = Vector3::zeros();
    d_mean_cam.x += d_j[(0, 2)] * (-view.fx * zi2);
    d_mean_cam.y += d_j[(1, 2)] * (-view.fy * zi2);
    d_mean_cam.z += d_j[(0, 0)] * (-view.fx * zi2)
        + d_j[(1, 1)] * (-view.fy * zi2)
        + d_j[(0, 2)] * (2.0 * view.fx * x * zi3)
        + d_j[(1, 2)] * (2.0 * view.fy * y * zi3);

    // Center projection path.
    d_mean_cam += j.transpose() * d_mean2d;

    ProjectionBackward { d_mean_cam, d_cov3d }
}
