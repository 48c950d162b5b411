use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{NbvError, Result};

/// Pinhole depth-sensor parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorIntrinsics {
    pub width: u32,
    pub height: u32,
    /// Full horizontal field of view, radians.
    pub hfov: f64,
    /// Full vertical field of view, radians.
    pub vfov: f64,
    pub min_range: f64,
    pub max_range: f64,
}

impl SensorIntrinsics {
    pub fn new(width: u32, height: u32, hfov: f64, vfov: f64, min_range: f64, max_range: f64) -> Result<Self> {
        let s = SensorIntrinsics {
            width,
            height,
            hfov,
            vfov,
            min_range,
            max_range,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let fov_ok = |f: f64| f > 0.0 && f < std::f64::consts::PI;
        if self.width < 1 || self.height < 1 {
            return Err(NbvError::invalid("sensor resolution must be at least 1x1"));
        }
        if !fov_ok(self.hfov) || !fov_ok(self.vfov) {
            return Err(NbvError::invalid(format!(
                "fields of view must lie in (0, pi), got {} x {}",
                self.hfov, self.vfov
            )));
        }
        if !(self.min_range > 0.0 && self.min_range < self.max_range && self.max_range.is_finite()) {
            return Err(NbvError::invalid(format!(
                "ranges must satisfy 0 < min < max, got [{}, {}]",
                self.min_range, self.max_range
            )));
        }
        Ok(())
    }

    pub fn tan_half_h(&self) -> f64 {
        (0.5 * self.hfov).tan()
    }

    pub fn tan_half_v(&self) -> f64 {
        (0.5 * self.vfov).tan()
    }

    /// Unit ray through the center of pixel `(u, v)` in the camera frame
    /// (+z forward, +x right, +y down).
    pub fn pixel_direction(&self, u: u32, v: u32) -> Vector3<f64> {
        let x = (2.0 * (u as f64 + 0.5) / self.width as f64 - 1.0) * self.tan_half_h();
        let y = (2.0 * (v as f64 + 0.5) / self.height as f64 - 1.0) * self.tan_half_v();
        Vector3::new(x, y, 1.0).normalize()
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Camera position and orientation. Rotation columns are the camera axes
/// (right, down, forward) expressed in world coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Point3<f64>,
    pub rotation: Rotation3<f64>,
}

impl CameraPose {
    /// Builds a pose from a rotation matrix; rejects non-orthonormal input.
    pub fn new(position: Point3<f64>, rotation: Matrix3<f64>) -> Result<CameraPose> {
        let gram = rotation.transpose() * rotation;
        if (gram - Matrix3::identity()).abs().max() > 1e-6 || (rotation.determinant() - 1.0).abs() > 1e-6 {
            return Err(NbvError::invalid("camera rotation must be in SO(3)"));
        }
        if !position.iter().all(|c| c.is_finite()) {
            return Err(NbvError::invalid("camera position must be finite"));
        }
        Ok(CameraPose {
            position,
            rotation: Rotation3::from_matrix_unchecked(rotation),
        })
    }

    /// Looks from `position` along `forward`, rolled by `roll` radians about
    /// the optical axis. The unrolled image "up" is the world +z projection;
    /// for vertical views world +y is used instead.
    pub fn looking(position: Point3<f64>, forward: Vector3<f64>, roll: f64) -> Result<CameraPose> {
        let f = forward
            .try_normalize(1e-12)
            .ok_or_else(|| NbvError::invalid("view direction must be non-zero"))?;
        let up = if f.cross(&Vector3::z()).norm() > 1e-6 {
            Vector3::z()
        } else {
            Vector3::y()
        };
        let right = f.cross(&up).normalize();
        let down = f.cross(&right);
        let (s, c) = roll.sin_cos();
        let r = right * c + down * s;
        let d = down * c - right * s;
        CameraPose::new(position, Matrix3::from_columns(&[r, d, f]))
    }

    pub fn look_at(position: Point3<f64>, target: Point3<f64>) -> Result<CameraPose> {
        CameraPose::looking(position, target - position, 0.0)
    }

    /// Forward direction (cos el cos az, cos el sin az, sin el).
    pub fn from_angles(position: Point3<f64>, elevation: f64, azimuth: f64, roll: f64) -> Result<CameraPose> {
        CameraPose::looking(position, direction_from_angles(elevation, azimuth), roll)
    }

    pub fn forward(&self) -> Vector3<f64> {
        self.rotation.matrix().column(2).into_owned()
    }

    pub fn right(&self) -> Vector3<f64> {
        self.rotation.matrix().column(0).into_owned()
    }

    pub fn down(&self) -> Vector3<f64> {
        self.rotation.matrix().column(1).into_owned()
    }

    pub fn to_camera(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.rotation.inverse_transform_vector(&(p - self.position))
    }

    pub fn to_world_direction(&self, d: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * d
    }

    /// Frustum membership: inside the pyramidal field of view and within the
    /// sensor's Euclidean range.
    pub fn sees_in_frustum(&self, intr: &SensorIntrinsics, x: &Point3<f64>) -> bool {
        let p = self.to_camera(x);
        if p.z <= 0.0 {
            return false;
        }
        if p.x.abs() > p.z * intr.tan_half_h() || p.y.abs() > p.z * intr.tan_half_v() {
            return false;
        }
        let r = p.norm();
        r >= intr.min_range && r <= intr.max_range
    }
}

pub fn direction_from_angles(elevation: f64, azimuth: f64) -> Vector3<f64> {
    let (se, ce) = elevation.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    Vector3::new(ce * ca, ce * sa, se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn intr() -> SensorIntrinsics {
        SensorIntrinsics::new(64, 48, 1.0, 0.8, 0.1, 10.0).unwrap()
    }

    #[test]
    fn rotation_is_proper() {
        for (el, az, roll) in [(0.3, 1.2, 0.0), (-1.0, -2.0, 0.7), (FRAC_PI_2, 0.0, 0.0), (-FRAC_PI_2, 0.4, 0.1)] {
            let p = CameraPose::from_angles(Point3::origin(), el, az, roll).unwrap();
            let m = p.rotation.matrix();
            assert!((m.determinant() - 1.0).abs() < 1e-9);
            assert!((m.transpose() * m - Matrix3::identity()).abs().max() < 1e-9);
            assert!((p.forward() - direction_from_angles(el, az)).norm() < 1e-12);
        }
    }

    #[test]
    fn look_at_points_optical_axis_at_target() {
        let p = CameraPose::look_at(Point3::new(1.0, 2.0, 3.0), Point3::new(-1.0, 0.5, 0.0)).unwrap();
        let axis = (Point3::new(-1.0, 0.5, 0.0) - p.position).normalize();
        assert!((p.forward() - axis).norm() < 1e-12);
        assert!(p.down().z <= 0.0);
    }

    #[test]
    fn frustum_edges() {
        let i = intr();
        let p = CameraPose::look_at(Point3::origin(), Point3::new(0.0, 0.0, 1.0)).unwrap();
        assert!(p.sees_in_frustum(&i, &Point3::new(0.0, 0.0, 2.0)));
        assert!(!p.sees_in_frustum(&i, &Point3::new(0.0, 0.0, -2.0)));
        assert!(!p.sees_in_frustum(&i, &Point3::new(0.0, 0.0, 0.05)));
        assert!(!p.sees_in_frustum(&i, &Point3::new(0.0, 0.0, 11.0)));
        // horizontal half-angle 0.5 rad: tan 0.5 ~ 0.546
        let inside = p.position + 2.0 * (p.forward() + 0.5 * p.right());
        let outside = p.position + 2.0 * (p.forward() + 0.6 * p.right());
        assert!(p.sees_in_frustum(&i, &inside));
        assert!(!p.sees_in_frustum(&i, &outside));
    }

    #[test]
    fn center_pixel_is_forward() {
        let i = SensorIntrinsics::new(3, 3, 1.0, 1.0, 0.1, 5.0).unwrap();
        assert!((i.pixel_direction(1, 1) - Vector3::z()).norm() < 1e-12);
        assert!(i.pixel_direction(2, 1).x > 0.0);
        assert!(i.pixel_direction(1, 2).y > 0.0);
    }

    #[test]
    fn invalid_intrinsics_rejected() {
        assert!(SensorIntrinsics::new(0, 1, 1.0, 1.0, 0.1, 1.0).is_err());
        assert!(SensorIntrinsics::new(1, 1, 3.2, 1.0, 0.1, 1.0).is_err());
        assert!(SensorIntrinsics::new(1, 1, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(SensorIntrinsics::new(1, 1, 1.0, 1.0, 0.0, 1.0).is_err());
    }
}
