//! Camera models, rotation parameterizations, spherical camera placement and
//! 3D–3D alignment.

mod camera;
mod rotation;
mod spherical;
mod umeyama;

pub use camera::{project, unproject, CameraIntrinsics, RigidPose, MIN_PROJECTABLE_DEPTH};
pub use rotation::{
    axis_angle, geodesic_distance, matrix_to_rot6d, rot6d_to_matrix, validate_rotation, Rotation6D,
    ROT6D_DEGENERACY_EPS, ROTATION_TOLERANCE,
};
pub use spherical::{
    pose_to_spherical, relative_spherical, spherical_to_pose, wrap_angle, SphericalCamera, LOOK_AT_TOLERANCE,
};
pub use umeyama::{umeyama_align, Similarity};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid 6D rotation: {0}")]
    InvalidRotation6D(String),
    #[error("not a rotation matrix: {0}")]
    NotARotation(String),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid spherical camera: {0}")]
    InvalidSpherical(String),
    #[error("pose does not look at the origin: {0}")]
    NotLookingAtOrigin(String),
    #[error("point is not in front of the camera (depth {depth})")]
    BehindCamera { depth: f64 },
    #[error("depth must be positive and finite, got {0}")]
    InvalidDepth(f64),
    #[error("pixel ({x}, {y}) lies outside the image")]
    PixelOutOfBounds { x: f64, y: f64 },
    #[error("point sets differ in size ({left} vs {right})")]
    SizeMismatch { left: usize, right: usize },
    #[error("degenerate alignment: {0}")]
    DegenerateAlignment(String),
}
