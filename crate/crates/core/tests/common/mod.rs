#![allow(dead_code)]

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use catpose_core::geometry::{axis_angle, geodesic_distance, project, unproject};
use catpose_core::io::DatasetManifest;
use catpose_core::matching::FeatureMap;
use catpose_core::pipeline::ReferenceSet;
use catpose_core::refinement::{Correspondence2D3D, RefinementProblem};
use catpose_core::synth::DepthMap;
use catpose_core::{CameraIntrinsics, RigidPose};

pub fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    let axis = random_unit(rng);
    axis_angle(&axis, rng.gen_range(0.0..std::f64::consts::PI))
}

pub fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Rotates by exactly `deg` about a random axis and scales the translation
/// error to `trans_frac` of its norm.
pub fn perturb(pose: &RigidPose, deg: f64, trans_frac: f64, rng: &mut impl Rng) -> RigidPose {
    let r = axis_angle(&random_unit(rng), deg.to_radians()) * pose.rotation;
    let t = pose.translation + random_unit(rng) * pose.translation.norm() * trans_frac;
    RigidPose::new(r, t).unwrap()
}

pub fn rotation_error_deg(a: &RigidPose, b: &RigidPose) -> f64 {
    geodesic_distance(&a.rotation, &b.rotation).to_degrees()
}

pub fn nearest_reference(manifest: &DatasetManifest, pose: &RigidPose) -> usize {
    (0..manifest.references.len())
        .min_by(|&a, &b| {
            rotation_error_deg(&manifest.reference_pose(a), pose)
                .total_cmp(&rotation_error_deg(&manifest.reference_pose(b), pose))
        })
        .unwrap()
}

/// Ground-truth 2D-3D correspondences: reference foreground cell centres
/// lifted with the reference depth and projected into the query with its true
/// pose, kept only where the query sees the same surface point.
pub fn oracle_correspondences(
    k: &CameraIntrinsics,
    ref_pose: &RigidPose,
    ref_features: &FeatureMap,
    ref_depth: &DepthMap,
    query_pose: &RigidPose,
    query_depth: &DepthMap,
) -> Vec<Correspondence2D3D> {
    let mut out = Vec::new();
    for i in ref_features.foreground_indices() {
        let px = ref_features.cell_to_pixel(ref_features.cell_at(i));
        let Some(d) = ref_depth.sample_nearest(&px).filter(|d| *d > 0.0) else { continue };
        let world = unproject(&px, f64::from(d), k, ref_pose).unwrap();
        let Ok(q_px) = project(k, query_pose, &world) else { continue };
        if !k.contains(&q_px) {
            continue;
        }
        let Some(dq) = query_depth.sample_nearest(&q_px).filter(|d| *d > 0.0) else { continue };
        let z = query_pose.transform(&world).z;
        if (f64::from(dq) - z).abs() > 0.01 {
            continue;
        }
        out.push(Correspondence2D3D { query_px: q_px, ref_world: world });
    }
    out
}

pub struct Trial {
    pub problem: RefinementProblem,
    pub gt: RigidPose,
    /// Query pixels with the query's measured depth at them.
    pub query_depth: DepthMap,
}

/// Oracle correspondences between a query and its nearest reference, with
/// the initial pose perturbed from ground truth.
pub fn oracle_trial(
    manifest: &DatasetManifest,
    refs: &ReferenceSet,
    query: usize,
    deg: f64,
    trans_frac: f64,
    rng: &mut ChaCha8Rng,
) -> Trial {
    let q = &manifest.queries[query];
    let gt = q.pose.to_pose().unwrap();
    let query_depth = catpose_core::io::read_depth_map(&manifest.resolve(q.depth.as_ref().unwrap())).unwrap();
    let r = nearest_reference(manifest, &gt);
    let correspondences = oracle_correspondences(
        &manifest.intrinsics,
        &manifest.reference_pose(r),
        &refs.features[r],
        &refs.depths[r],
        &gt,
        &query_depth,
    );
    let initial_pose = perturb(&gt, deg, trans_frac, rng);
    Trial {
        problem: RefinementProblem { intrinsics_q: manifest.intrinsics, correspondences, initial_pose },
        gt,
        query_depth,
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

pub fn pixel(x: f64, y: f64) -> Vector2<f64> {
    Vector2::new(x, y)
}
