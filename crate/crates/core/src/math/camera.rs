//! Pinhole camera views.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::UnitQuaternion;

/// An SE(3) pose (world-to-camera) with pinhole intrinsics and a timestamp.
///
/// Camera convention: x right, y down, z forward; a world point `p` maps to
/// camera space as `R p + t` and to pixels as `(fx x/z + cx, fy y/z + cy)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraView {
    /// World-to-camera rotation.
    pub rotation: UnitQuaternion,
    /// World-to-camera translation, meters.
    pub translation: Vector3<f64>,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Seconds.
    pub time: f64,
}

impl CameraView {
    pub fn world_to_camera(&self) -> Matrix3<f64> {
        self.rotation.rotation_matrix()
    }

    /// Camera center in world coordinates, `-R^T t`.
    pub fn camera_center(&self) -> Vector3<f64> {
        -(self.world_to_camera().transpose() * self.translation)
    }

    pub fn to_camera_space(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.world_to_camera() * world + self.translation
    }

    /// Interpolates between two timed views: slerp on rotation, lerp on
    /// translation and intrinsics are taken from `self`.
    pub fn interpolate(&self, other: &CameraView, time: f64) -> CameraView {
        let span = other.time - self.time;
        let t = if span.abs() < 1e-15 { 0.0 } else { ((time - self.time) / span).clamp(0.0, 1.0) };
        CameraView {
            rotation: self.rotation.slerp(&other.rotation, t),
            translation: self.translation.lerp(&other.translation, t),
            time,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn camera_center_inverts_pose() {
        let rot = UnitQuaternion::from_axis_angle(Vector3::new(0.2, 1.0, -0.4), 0.7);
        let center = Vector3::new(1.0, -2.0, 3.0);
        let view = CameraView {
            rotation: rot,
            translation: -(rot.rotation_matrix() * center),
            fx: 100.0,
            fy: 100.0,
            cx: 50.0,
            cy: 50.0,
            width: 100,
            height: 100,
            time: 0.0,
        };
        assert_relative_eq!(view.camera_center(), center, epsilon = 1e-12);
        assert_relative_eq!(view.to_camera_space(&center), Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn interpolation_hits_endpoints() {
        let a = CameraView {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
            fx: 10.0, fy: 10.0, cx: 5.0, cy: 5.0, width: 10, height: 10,
            time: 0.0,
        };
        let b = CameraView {
            rotation: UnitQuaternion::from_axis_angle(Vector3::z(), 1.0),
            translation: Vector3::new(2.0, 0.0, 0.0),
            time: 2.0,
            ..a.clone()
        };
        let mid = a.interpolate(&b, 1.0);
        assert_relative_eq!(mid.translation.x, 1.0, epsilon = 1e-12);
        let expect = UnitQuaternion::from_axis_angle(Vector3::z(), 0.5);
        assert!(mid.rotation.dot(&expect).abs() > 1.0 - 1e-12);
    }
}
