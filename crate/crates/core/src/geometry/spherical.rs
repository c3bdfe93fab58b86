//! Object-centric spherical camera placement.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::camera::RigidPose;
use super::GeometryError;

/// Angular tolerance for "the optical axis passes through the origin".
pub const LOOK_AT_TOLERANCE: f64 = 1e-6;

/// Below this `‖forward × up‖` the world +z up vector is swapped for +x.
const UP_PARALLEL_EPS: f64 = 1e-9;

/// Camera position on a sphere around the object: polar angle from +z,
/// azimuth from +x toward +y, and distance to the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalCamera {
    pub theta: f64,
    pub phi: f64,
    pub radius: f64,
}

impl SphericalCamera {
    /// Validates ranges and canonicalizes `phi` into `[−π, π)`.
    pub fn new(theta: f64, phi: f64, radius: f64) -> Result<Self, GeometryError> {
        if !(theta.is_finite() && (0.0..=PI).contains(&theta)) {
            return Err(GeometryError::InvalidSpherical(format!("theta={theta} outside [0, π]")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeometryError::InvalidSpherical(format!("radius={radius} must be positive")));
        }
        if !phi.is_finite() {
            return Err(GeometryError::InvalidSpherical(format!("phi={phi} is not finite")));
        }
        Ok(Self { theta, phi: wrap_angle(phi), radius })
    }

    pub fn center(&self) -> Vector3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        self.radius * Vector3::new(st * cp, st * sp, ct)
    }
}

/// Wraps an angle into `[−π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly TAU.
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Camera on the sphere looking at the origin. Roll is fixed by keeping world
/// +z up in the image (camera −y), falling back to world +x at the poles.
pub fn spherical_to_pose(s: &SphericalCamera) -> RigidPose {
    let center = s.center();
    let forward = -center / center.norm();
    let mut right = forward.cross(&Vector3::z());
    if right.norm() < UP_PARALLEL_EPS {
        right = forward.cross(&Vector3::x());
    }
    let right = right.normalize();
    let down = forward.cross(&right);
    let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    RigidPose { rotation, translation: -(rotation * center) }
}

/// Inverse of [`spherical_to_pose`] for cameras whose optical axis passes
/// through the origin.
pub fn pose_to_spherical(p: &RigidPose) -> Result<SphericalCamera, GeometryError> {
    let center = p.center();
    let radius = center.norm();
    if !(radius > 0.0) {
        return Err(GeometryError::NotLookingAtOrigin(
            "camera center coincides with the origin".into(),
        ));
    }
    let to_origin = -center / radius;
    let axis = p.optical_axis();
    let angle = axis.cross(&to_origin).norm().atan2(axis.dot(&to_origin));
    if angle > LOOK_AT_TOLERANCE {
        return Err(GeometryError::NotLookingAtOrigin(format!(
            "optical axis misses the origin by {angle:e} rad"
        )));
    }
    let theta = (center.z / radius).clamp(-1.0, 1.0).acos();
    let phi = center.y.atan2(center.x);
    SphericalCamera::new(theta, phi, radius)
}

/// `(θ2 − θ1, wrap(φ2 − φ1), r2 − r1)`.
pub fn relative_spherical(s1: &SphericalCamera, s2: &SphericalCamera) -> (f64, f64, f64) {
    (s2.theta - s1.theta, wrap_angle(s2.phi - s1.phi), s2.radius - s1.radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation::validate_rotation;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn equator_camera_at_plus_x() {
        let p = spherical_to_pose(&SphericalCamera::new(FRAC_PI_2, 0.0, 2.0).unwrap());
        validate_rotation(&p.rotation).unwrap();
        assert_relative_eq!(p.center(), Vector3::new(2.0, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(p.optical_axis(), Vector3::new(-1.0, 0.0, 0.0), epsilon = 1e-15);
        // Origin projects onto the optical axis.
        assert_relative_eq!(p.transform(&Vector3::zeros()), Vector3::new(0.0, 0.0, 2.0), epsilon = 1e-15);
        // World up is image up.
        assert!(p.rotation.row(1)[2] < 0.0);
    }

    #[test]
    fn unit_radius_at_plus_y() {
        let p = spherical_to_pose(&SphericalCamera::new(FRAC_PI_2, FRAC_PI_2, 1.0).unwrap());
        assert_relative_eq!(p.center(), Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn pole_uses_fallback_up() {
        for theta in [0.0, PI] {
            let s = SphericalCamera::new(theta, 0.3, 3.0).unwrap();
            let p = spherical_to_pose(&s);
            validate_rotation(&p.rotation).unwrap();
            assert!(p.rotation.iter().all(|x| x.is_finite()));
            let back = pose_to_spherical(&p).unwrap();
            assert_relative_eq!(back.theta, theta, epsilon = 1e-12);
            assert_relative_eq!(back.radius, 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn looking_down_from_above() {
        let pose = RigidPose {
            rotation: Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0)),
            translation: Vector3::new(0.0, 0.0, 3.0),
        };
        assert_relative_eq!(pose.center(), Vector3::new(0.0, 0.0, 3.0));
        let s = pose_to_spherical(&pose).unwrap();
        assert_eq!(s.theta, 0.0);
        assert_relative_eq!(s.radius, 3.0);
    }

    #[test]
    fn diagonal_azimuth() {
        let c = Vector3::new(1.0, 1.0, 0.0) * (2.0 / 2f64.sqrt());
        let s0 = SphericalCamera::new(FRAC_PI_2, PI / 4.0, 2.0).unwrap();
        let p = spherical_to_pose(&s0);
        assert_relative_eq!(p.center(), c, epsilon = 1e-15);
        let s = pose_to_spherical(&p).unwrap();
        assert_relative_eq!(s.phi, PI / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn off_axis_pose_rejected() {
        let mut p = spherical_to_pose(&SphericalCamera::new(1.0, 0.5, 2.0).unwrap());
        p.translation.x += 0.01;
        assert!(matches!(pose_to_spherical(&p), Err(GeometryError::NotLookingAtOrigin(_))));
    }

    #[test]
    fn phi_is_canonical() {
        assert_eq!(SphericalCamera::new(1.0, PI, 1.0).unwrap().phi, -PI);
        assert_relative_eq!(SphericalCamera::new(1.0, 3.0 * PI / 2.0, 1.0).unwrap().phi, -FRAC_PI_2);
        assert!(SphericalCamera::new(-0.1, 0.0, 1.0).is_err());
        assert!(SphericalCamera::new(0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn relative_transform() {
        let a = SphericalCamera::new(PI / 4.0, 3.0, 2.0).unwrap();
        let b = SphericalCamera::new(FRAC_PI_2, -3.0, 2.5).unwrap();
        assert_eq!(relative_spherical(&a, &a), (0.0, 0.0, 0.0));
        let (dt, dp, dr) = relative_spherical(&a, &b);
        assert_relative_eq!(dt, PI / 4.0);
        assert_relative_eq!(dp, TAU - 6.0, epsilon = 1e-12);
        assert_relative_eq!(dp, 0.2832, epsilon = 1e-4);
        assert_relative_eq!(dr, 0.5);
    }
}
