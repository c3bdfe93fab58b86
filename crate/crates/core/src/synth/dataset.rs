use std::f64::consts::{PI, TAU};
use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::render::{render_depth, render_features, GridSpec};
use super::scene::{SyntheticScene, Warp};
use super::SynthError;
use crate::geometry::{axis_angle, spherical_to_pose, CameraIntrinsics, RigidPose, SphericalCamera};
use crate::io::container::{write_depth_map, write_feature_map};
use crate::io::manifest::{
    write_manifest, Conventions, DatasetManifest, PoseRecord, QueryView, ReferenceView, MANIFEST_FORMAT,
    MANIFEST_VERSION,
};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Cameras stay out of the polar caps, where `cos θ` exceeds this.
const MAX_ABS_COS_THETA: f64 = 0.85;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    /// Random scene from `seed` when absent.
    pub scene: Option<SyntheticScene>,
    pub category: String,
    pub n_refs: usize,
    pub n_queries: usize,
    pub noise_sd: f64,
    pub seed: u64,
    pub intrinsics: CameraIntrinsics,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub descriptor_dim: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    /// Largest in-plane rotation of a query camera, degrees.
    pub query_roll_deg: f64,
    /// Largest off-centre tilt of a query camera, degrees.
    pub query_tilt_deg: f64,
    /// Query instances get a warp amplitude drawn from `[0, max_warp]`.
    pub max_warp: f64,
    pub warp_frequency: f64,
    pub query_depth: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            scene: None,
            category: "synthetic".into(),
            n_refs: 50,
            n_queries: 10,
            noise_sd: 0.0,
            seed: 0,
            intrinsics: CameraIntrinsics { fx: 200.0, fy: 200.0, cx: 64.0, cy: 64.0, width: 128, height: 128 },
            grid_rows: 32,
            grid_cols: 32,
            descriptor_dim: 64,
            radius_min: 2.3,
            radius_max: 2.7,
            query_roll_deg: 10.0,
            query_tilt_deg: 3.0,
            max_warp: 0.0,
            warp_frequency: 2.0,
            query_depth: true,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.n_refs < 1 || self.n_queries < 1 {
            return bad("n_refs and n_queries must be at least 1".into());
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(SynthError::InvalidNoise(self.noise_sd));
        }
        if self.intrinsics.validate().is_err() {
            return bad("invalid intrinsics".into());
        }
        if self.grid_rows < 1 || self.grid_cols < 1 {
            return bad("grid must have at least one cell".into());
        }
        if !(self.radius_min > 1.0 && self.radius_min <= self.radius_max && self.radius_max.is_finite()) {
            return bad(format!(
                "camera radius range [{}, {}] must lie outside the unit ball",
                self.radius_min, self.radius_max
            ));
        }
        if !(0.0..0.5).contains(&self.max_warp) {
            return bad(format!("max_warp {} must lie in [0, 0.5)", self.max_warp));
        }
        for (name, v) in [("query_roll_deg", self.query_roll_deg), ("query_tilt_deg", self.query_tilt_deg)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name}={v} must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::covering(self.intrinsics.width, self.intrinsics.height, self.grid_rows, self.grid_cols)
    }
}

/// Reference viewpoints stratified over the sphere: equal-area bands in
/// `cos θ`, golden-angle azimuth steps, each jittered within its stratum.
fn reference_cameras(n: usize, cfg: &DatasetConfig, rng: &mut ChaCha8Rng) -> Vec<SphericalCamera> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let band = 2.0 * MAX_ABS_COS_THETA / n as f64;
    let phi0 = rng.gen_range(0.0..TAU);
    (0..n)
        .map(|i| {
            let z = MAX_ABS_COS_THETA - band * (i as f64 + rng.gen_range(0.25..0.75));
            let phi = phi0 + golden * i as f64 + rng.gen_range(-0.1..0.1);
            let radius = rng.gen_range(cfg.radius_min..=cfg.radius_max);
            SphericalCamera::new(z.acos(), phi, radius).expect("sampled inside the valid range")
        })
        .collect()
}

fn query_pose(cfg: &DatasetConfig, rng: &mut ChaCha8Rng) -> RigidPose {
    let z: f64 = rng.gen_range(-MAX_ABS_COS_THETA..MAX_ABS_COS_THETA);
    let s = SphericalCamera::new(z.acos(), rng.gen_range(-PI..PI), rng.gen_range(cfg.radius_min..=cfg.radius_max))
        .expect("sampled inside the valid range");
    let base = spherical_to_pose(&s);
    let roll = axis_angle(&Vector3::z(), rng.gen_range(-1.0..=1.0) * cfg.query_roll_deg.to_radians());
    let tilt_dir = rng.gen_range(0.0..TAU);
    let tilt = axis_angle(
        &Vector3::new(tilt_dir.cos(), tilt_dir.sin(), 0.0),
        rng.gen_range(0.0..=1.0) * cfg.query_tilt_deg.to_radians(),
    );
    let delta = tilt * roll;
    RigidPose::new(delta * base.rotation, delta * base.translation).expect("product of rotations")
}

/// Renders a full dataset under `out_dir` and writes its manifest there.
/// Output is a pure function of `cfg`.
pub fn make_dataset(cfg: &DatasetConfig, out_dir: &Path) -> Result<DatasetManifest, SynthError> {
    cfg.validate()?;
    let scene = cfg.scene.clone().unwrap_or_else(|| SyntheticScene::random(cfg.seed, cfg.descriptor_dim));
    scene.validate()?;
    let k = cfg.intrinsics;
    let grid = cfg.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut references = Vec::with_capacity(cfg.n_refs);
    for (i, s) in reference_cameras(cfg.n_refs, cfg, &mut rng).into_iter().enumerate() {
        let pose = spherical_to_pose(&s);
        let id = format!("ref_{i:03}");
        let depth = format!("refs/{id}.depth.zpkt");
        let features = format!("refs/{id}.feat.zpkt");
        write_depth_map(&out_dir.join(&depth), &render_depth(&scene, &k, &pose))?;
        let f = render_features(&scene, &k, &pose, cfg.noise_sd, &grid, rng.gen())?;
        write_feature_map(&out_dir.join(&features), &f)?;
        references.push(ReferenceView { id, spherical: s, pose: PoseRecord::from(&pose), depth, features });
    }

    let mut queries = Vec::with_capacity(cfg.n_queries);
    for i in 0..cfg.n_queries {
        let pose = query_pose(cfg, &mut rng);
        let amplitude = if cfg.max_warp > 0.0 { rng.gen_range(0.0..cfg.max_warp) } else { 0.0 };
        let warp = Warp { amplitude, frequency: cfg.warp_frequency };
        let instance = scene.with_warp(warp);
        instance.validate()?;
        let id = format!("q_{i:03}");
        let features = format!("queries/{id}.feat.zpkt");
        let f = render_features(&instance, &k, &pose, cfg.noise_sd, &grid, rng.gen())?;
        write_feature_map(&out_dir.join(&features), &f)?;
        let depth = if cfg.query_depth {
            let rel = format!("queries/{id}.depth.zpkt");
            write_depth_map(&out_dir.join(&rel), &render_depth(&instance, &k, &pose))?;
            Some(rel)
        } else {
            None
        };
        queries.push(QueryView {
            id,
            category: cfg.category.clone(),
            pose: PoseRecord::from(&pose),
            features,
            depth,
            warp: (!warp.is_identity()).then_some(warp),
        });
    }

    let manifest = DatasetManifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        conventions: Conventions::default(),
        intrinsics: k,
        scene: Some(scene),
        grid: Some(grid),
        noise_sd: cfg.noise_sd,
        seed: Some(cfg.seed),
        references,
        queries,
        base_dir: out_dir.to_path_buf(),
    };
    write_manifest(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
