//! Fixtures shared by the benchmarks.

use catpose_core::geometry::spherical_to_pose;
use catpose_core::synth::{render_features, GridSpec};
use catpose_core::{CameraIntrinsics, FeatureMap, RigidPose, SphericalCamera, SyntheticScene};

pub fn intrinsics() -> CameraIntrinsics {
    CameraIntrinsics { fx: 200.0, fy: 200.0, cx: 64.0, cy: 64.0, width: 128, height: 128 }
}

pub fn scene() -> SyntheticScene {
    SyntheticScene::random(7, 64)
}

pub fn pose(theta_deg: f64, phi_deg: f64) -> RigidPose {
    let s = SphericalCamera::new(theta_deg.to_radians(), phi_deg.to_radians(), 2.5).expect("valid camera");
    spherical_to_pose(&s)
}

/// Feature map of the fixture scene seen from `pose` on a `cells`×`cells` grid.
pub fn features(pose: &RigidPose, cells: usize) -> FeatureMap {
    let k = intrinsics();
    let grid = GridSpec::covering(k.width, k.height, cells, cells);
    render_features(&scene(), &k, pose, 0.0, &grid, 0).expect("fixture renders")
}
