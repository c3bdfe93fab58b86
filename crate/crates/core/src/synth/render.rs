//! Depth and descriptor rendering of synthetic scenes.

use std::f64::consts::TAU;

use nalgebra::{DVector, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scene::{SurfaceHit, SyntheticScene};
use super::SynthError;
use crate::geometry::{CameraIntrinsics, RigidPose};
use crate::matching::{Cell, FeatureMap};

/// Angular frequency scale of the descriptor embedding, per scene unit.
pub const DESCRIPTOR_FREQUENCY: f64 = 4.0;

/// Per-pixel camera-frame z-depth in meters, row-major; 0 where nothing is hit.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32, values: Vec<f32>) -> Result<Self, SynthError> {
        if values.len() != width as usize * height as usize {
            return Err(SynthError::InvalidDepthMap(format!(
                "{} values for a {width}x{height} map",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(SynthError::InvalidDepthMap(format!("value {} at index {i}", values[i])));
        }
        Ok(Self { width, height, values })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, col: u32, row: u32) -> f32 {
        self.values[row as usize * self.width as usize + col as usize]
    }

    /// Depth at the pixel whose centre is nearest to `px`, if inside the map.
    pub fn sample_nearest(&self, px: &Vector2<f64>) -> Option<f32> {
        let (c, r) = (px.x.round(), px.y.round());
        if c < 0.0 || r < 0.0 || c >= f64::from(self.width) || r >= f64::from(self.height) {
            return None;
        }
        Some(self.get(c as u32, r as u32))
    }
}

/// Layout of a feature grid over the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub stride: f64,
    pub offset: f64,
}

impl GridSpec {
    /// `rows × cols` cells tiling a `width × height` image with integer
    /// stride, each cell centred on an integer pixel.
    pub fn covering(width: u32, height: u32, rows: usize, cols: usize) -> Self {
        let stride = (width as usize / cols).min(height as usize / rows).max(1);
        Self { rows, cols, stride: stride as f64, offset: (stride / 2) as f64 }
    }

    pub fn cell_pixel(&self, cell: Cell) -> Vector2<f64> {
        Vector2::new(self.offset + cell.col as f64 * self.stride, self.offset + cell.row as f64 * self.stride)
    }
}

/// Seeded random-feature embedding `cos(ω_i · c + b_i)` of canonical surface
/// coordinates. Equal coordinates give equal descriptors in every view.
#[derive(Debug, Clone)]
pub struct DescriptorField {
    frequencies: Vec<Vector3<f64>>,
    phases: Vec<f64>,
}

impl DescriptorField {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut frequencies = Vec::with_capacity(dim);
        let mut phases = Vec::with_capacity(dim);
        for _ in 0..dim {
            let w: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            frequencies.push(Vector3::from(w) * DESCRIPTOR_FREQUENCY);
            phases.push(rng.gen_range(0.0..TAU));
        }
        Self { frequencies, phases }
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    pub fn describe(&self, canonical: &Vector3<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.frequencies.iter().zip(&self.phases).map(|(w, b)| (w.dot(canonical) + b).cos()),
        )
    }
}

/// World ray through a pixel, with direction scaled so that the ray parameter
/// equals camera-frame depth.
pub fn pixel_ray(k: &CameraIntrinsics, pose: &RigidPose, px: &Vector2<f64>) -> (Vector3<f64>, Vector3<f64>) {
    (pose.center(), pose.rotation.transpose() * k.back_project(px))
}

pub fn cast_pixel(scene: &SyntheticScene, k: &CameraIntrinsics, pose: &RigidPose, px: &Vector2<f64>) -> Option<SurfaceHit> {
    let (o, d) = pixel_ray(k, pose, px);
    scene.cast(&o, &d)
}

/// Renders z-depth for every pixel centre of the image.
pub fn render_depth(scene: &SyntheticScene, k: &CameraIntrinsics, pose: &RigidPose) -> DepthMap {
    let (w, h) = (k.width as usize, k.height as usize);
    let values: Vec<f32> = (0..h)
        .into_par_iter()
        .flat_map_iter(|row| {
            (0..w).map(move |col| {
                cast_pixel(scene, k, pose, &Vector2::new(col as f64, row as f64)).map_or(0.0, |hit| hit.distance as f32)
            })
        })
        .collect();
    DepthMap { width: k.width, height: k.height, values }
}

/// Renders descriptors at grid-cell centres. Cells whose ray misses are
/// masked and hold zeros. Noise is drawn in row-major order from
/// `noise_seed`, so the output does not depend on thread scheduling.
pub fn render_features(
    scene: &SyntheticScene,
    k: &CameraIntrinsics,
    pose: &RigidPose,
    noise_sd: f64,
    grid: &GridSpec,
    noise_seed: u64,
) -> Result<FeatureMap, SynthError> {
    if scene.descriptor_dim < 8 {
        return Err(SynthError::InvalidScene(format!(
            "descriptor_dim {} must be at least 8",
            scene.descriptor_dim
        )));
    }
    if !(noise_sd.is_finite() && noise_sd >= 0.0) {
        return Err(SynthError::InvalidNoise(noise_sd));
    }
    let field = DescriptorField::new(scene.descriptor_dim, scene.descriptor_seed);
    let c = field.dim();
    let cells: Vec<Option<DVector<f64>>> = (0..grid.rows * grid.cols)
        .into_par_iter()
        .map(|i| {
            let px = grid.cell_pixel(Cell::new(i / grid.cols, i % grid.cols));
            cast_pixel(scene, k, pose, &px).map(|hit| field.describe(&hit.canonical))
        })
        .collect();

    let mut data = vec![0.0f32; grid.rows * grid.cols * c];
    let mut mask = vec![false; grid.rows * grid.cols];
    let noise = Normal::new(0.0, noise_sd).map_err(|_| SynthError::InvalidNoise(noise_sd))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    for (i, d) in cells.iter().enumerate() {
        let Some(d) = d else { continue };
        mask[i] = true;
        for (j, v) in d.iter().enumerate() {
            let n = if noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            data[i * c + j] = (v + n) as f32;
        }
    }
    Ok(FeatureMap::new(grid.rows, grid.cols, c, data, grid.stride, grid.offset, Some(mask))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{spherical_to_pose, SphericalCamera};
    use crate::synth::{Primitive, Warp};
    use approx::assert_relative_eq;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 32.0, 32.0, 65, 65).unwrap()
    }

    fn unit_sphere() -> SyntheticScene {
        SyntheticScene {
            primitives: vec![Primitive::Sphere { center: Vector3::zeros(), radius: 1.0 }],
            descriptor_dim: 16,
            descriptor_seed: 3,
            warp: Warp::default(),
        }
    }

    fn on_axis(distance: f64) -> RigidPose {
        RigidPose::new(nalgebra::Matrix3::identity(), Vector3::new(0.0, 0.0, distance)).unwrap()
    }

    #[test]
    fn sphere_center_depth() {
        let d = render_depth(&unit_sphere(), &k(), &on_axis(3.0));
        assert_relative_eq!(d.get(32, 32), 2.0, epsilon = 1e-6);
        assert_eq!(d.get(0, 0), 0.0);
    }

    #[test]
    fn empty_scene_renders_zeros() {
        let scene = SyntheticScene { primitives: vec![], ..unit_sphere() };
        assert!(render_depth(&scene, &k(), &on_axis(3.0)).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mask_matches_depth_at_cell_centres() {
        let scene = SyntheticScene::random(5, 16);
        let pose = spherical_to_pose(&SphericalCamera::new(1.0, 0.4, 2.5).unwrap());
        let grid = GridSpec::covering(65, 65, 16, 16);
        let depth = render_depth(&scene, &k(), &pose);
        let f = render_features(&scene, &k(), &pose, 0.0, &grid, 0).unwrap();
        let mut hits = 0;
        for i in 0..f.num_cells() {
            let cell = f.cell_at(i);
            let px = grid.cell_pixel(cell);
            let d = depth.sample_nearest(&px).unwrap();
            assert_eq!(f.is_foreground(cell), d > 0.0, "cell {cell:?}");
            hits += usize::from(d > 0.0);
        }
        assert!(hits > 10);
    }

    #[test]
    fn same_surface_point_same_descriptor_across_views() {
        let scene = SyntheticScene::random(9, 32);
        let field = DescriptorField::new(32, scene.descriptor_seed);
        let a = spherical_to_pose(&SphericalCamera::new(1.2, 0.0, 2.5).unwrap());
        let b = spherical_to_pose(&SphericalCamera::new(1.0, 0.5, 2.8).unwrap());
        let hit = cast_pixel(&scene, &k(), &a, &Vector2::new(32.0, 32.0)).unwrap();
        let px_b = crate::geometry::project(&k(), &b, &hit.world).unwrap();
        let hit_b = cast_pixel(&scene, &k(), &b, &px_b).unwrap();
        if (hit_b.world - hit.world).norm() < 1e-9 {
            let da = field.describe(&hit.canonical);
            let db = field.describe(&hit_b.canonical);
            assert!((da - db).amax() < 1e-12);
        }
    }

    #[test]
    fn identical_view_gives_zero_cycles() {
        let scene = SyntheticScene::random(2, 32);
        let pose = spherical_to_pose(&SphericalCamera::new(1.3, -0.7, 2.4).unwrap());
        let grid = GridSpec::covering(65, 65, 16, 16);
        let f = render_features(&scene, &k(), &pose, 0.0, &grid, 0).unwrap();
        let m = crate::matching::top_k_matches(&f, &f, 20, crate::matching::Metric::Cosine).unwrap();
        assert!(m.matches.iter().all(|m| m.cyc_dist == 0.0));
    }

    #[test]
    fn noise_is_seeded() {
        let scene = SyntheticScene::random(4, 16);
        let pose = spherical_to_pose(&SphericalCamera::new(1.3, 0.2, 2.4).unwrap());
        let grid = GridSpec::covering(65, 65, 8, 8);
        let a = render_features(&scene, &k(), &pose, 0.1, &grid, 11).unwrap();
        let b = render_features(&scene, &k(), &pose, 0.1, &grid, 11).unwrap();
        let c = render_features(&scene, &k(), &pose, 0.1, &grid, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(matches!(render_features(&scene, &k(), &pose, -1.0, &grid, 0), Err(SynthError::InvalidNoise(_))));
        let small = SyntheticScene { descriptor_dim: 4, ..scene };
        assert!(matches!(render_features(&small, &k(), &pose, 0.0, &grid, 0), Err(SynthError::InvalidScene(_))));
    }
}
