//! Pinhole intrinsics, rigid world→camera poses, projection and lifting.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::rotation::validate_rotation;
use super::GeometryError;

/// Smallest camera-frame depth that still counts as in front of the camera.
pub const MIN_PROJECTABLE_DEPTH: f64 = 1e-9;

/// Pinhole camera model. Pixel centers sit at integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(self.cx >= 0.0 && self.cx < f64::from(self.width)) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "cx={} outside [0, {})",
                self.cx, self.width
            )));
        }
        if !(self.cy >= 0.0 && self.cy < f64::from(self.height)) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "cy={} outside [0, {})",
                self.cy, self.height
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn contains(&self, px: &Vector2<f64>) -> bool {
        px.x >= 0.0 && px.y >= 0.0 && px.x < f64::from(self.width) && px.y < f64::from(self.height)
    }

    /// Pixel of a camera-frame point, no depth check.
    #[inline]
    pub fn project_camera_point(&self, p: &Vector3<f64>) -> Vector2<f64> {
        Vector2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    /// Direction through a pixel in the camera frame, with unit z component.
    #[inline]
    pub fn back_project(&self, px: &Vector2<f64>) -> Vector3<f64> {
        Vector3::new((px.x - self.cx) / self.fx, (px.y - self.cy) / self.fy, 1.0)
    }
}

/// World→camera rigid transform: `x_cam = R·X + t`. The camera looks down +z
/// with +x right and +y down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        validate_rotation(&rotation)?;
        if !translation.iter().all(|x| x.is_finite()) {
            return Err(GeometryError::NotARotation("non-finite translation".into()));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    #[inline]
    pub fn transform(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * x + self.translation
    }

    /// Camera center in world coordinates, `−Rᵀt`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Optical axis (+z of the camera) expressed in world coordinates.
    pub fn optical_axis(&self) -> Vector3<f64> {
        self.rotation.row(2).transpose()
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation) }
    }
}

/// Projects a world point into pixel coordinates with perspective division.
pub fn project(k: &CameraIntrinsics, pose: &RigidPose, x: &Vector3<f64>) -> Result<Vector2<f64>, GeometryError> {
    let p = pose.transform(x);
    if !(p.z > MIN_PROJECTABLE_DEPTH) {
        return Err(GeometryError::BehindCamera { depth: p.z });
    }
    Ok(k.project_camera_point(&p))
}

/// Lifts a pixel with known z-depth to a world point; inverse of [`project`].
pub fn unproject(
    px: &Vector2<f64>,
    depth: f64,
    k: &CameraIntrinsics,
    pose: &RigidPose,
) -> Result<Vector3<f64>, GeometryError> {
    if !(depth.is_finite() && depth > 0.0) {
        return Err(GeometryError::InvalidDepth(depth));
    }
    if !k.contains(px) {
        return Err(GeometryError::PixelOutOfBounds { x: px.x, y: px.y });
    }
    let cam = k.back_project(px) * depth;
    Ok(pose.rotation.transpose() * (cam - pose.translation))
}
