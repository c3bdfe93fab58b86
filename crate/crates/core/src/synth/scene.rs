//! Analytic solids, an optional smooth radial warp, and ray casting.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SynthError;

const MIN_HIT_DISTANCE: f64 = 1e-9;
/// March step along rays through a warped scene, in scene units.
const MARCH_STEP: f64 = 1e-3;
const BISECTION_STEPS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Primitive {
    Sphere { center: Vector3<f64>, radius: f64 },
    /// Axis-aligned box.
    Box { center: Vector3<f64>, half_extents: Vector3<f64> },
}

impl Primitive {
    /// Negative inside, positive outside. Exact distance for spheres; for
    /// boxes only the sign is meaningful outside the faces' slab.
    fn inside_measure(&self, p: &Vector3<f64>) -> f64 {
        match self {
            Primitive::Sphere { center, radius } => (p - center).norm() - radius,
            Primitive::Box { center, half_extents } => {
                let d = (p - center).abs() - half_extents;
                d.max()
            }
        }
    }

    /// Smallest `s > 0` with `o + s·d` on the surface.
    fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<f64> {
        match self {
            Primitive::Sphere { center, radius } => {
                let oc = o - center;
                let a = d.norm_squared();
                let b = oc.dot(d);
                let c = oc.norm_squared() - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                // Stable pair of roots.
                let q = -(b + b.signum() * sq);
                let (r1, r2) = if q != 0.0 { (q / a, c / q) } else { (-b / a, -b / a) };
                let (near, far) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
                if near > MIN_HIT_DISTANCE {
                    Some(near)
                } else if far > MIN_HIT_DISTANCE {
                    Some(far)
                } else {
                    None
                }
            }
            Primitive::Box { center, half_extents } => {
                let mut t_near = f64::NEG_INFINITY;
                let mut t_far = f64::INFINITY;
                for i in 0..3 {
                    let lo = center[i] - half_extents[i];
                    let hi = center[i] + half_extents[i];
                    if d[i] == 0.0 {
                        if o[i] < lo || o[i] > hi {
                            return None;
                        }
                        continue;
                    }
                    let t1 = (lo - o[i]) / d[i];
                    let t2 = (hi - o[i]) / d[i];
                    t_near = t_near.max(t1.min(t2));
                    t_far = t_far.min(t1.max(t2));
                }
                if t_near > t_far {
                    return None;
                }
                if t_near > MIN_HIT_DISTANCE {
                    Some(t_near)
                } else if t_far > MIN_HIT_DISTANCE {
                    Some(t_far)
                } else {
                    None
                }
            }
        }
    }

    fn bounding_radius(&self) -> f64 {
        match self {
            Primitive::Sphere { center, radius } => center.norm() + radius,
            Primitive::Box { center, half_extents } => center.norm() + half_extents.norm(),
        }
    }

    fn is_valid(&self) -> bool {
        match self {
            Primitive::Sphere { center, radius } => center.iter().all(|x| x.is_finite()) && *radius > 0.0,
            Primitive::Box { center, half_extents } => {
                center.iter().all(|x| x.is_finite()) && half_extents.iter().all(|&h| h > 0.0 && h.is_finite())
            }
        }
    }
}

/// Radial deformation `p = c · (1 + amplitude · f(ĉ))` with `|f| ≤ 1` a
/// low-frequency function of direction. It preserves directions, so the
/// inverse is closed-form.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Warp {
    pub amplitude: f64,
    pub frequency: f64,
}

impl Warp {
    pub fn is_identity(&self) -> bool {
        self.amplitude == 0.0
    }

    fn radial_factor(&self, dir: &Vector3<f64>) -> f64 {
        let w = self.frequency;
        let f = ((w * dir.x).sin() + (w * dir.y + 1.0).sin() + (w * dir.z + 2.0).sin()) / 3.0;
        1.0 + self.amplitude * f
    }

    /// Canonical point to deformed point.
    pub fn apply(&self, c: &Vector3<f64>) -> Vector3<f64> {
        let n = c.norm();
        if self.is_identity() || n == 0.0 {
            return *c;
        }
        c * self.radial_factor(&(c / n))
    }

    /// Deformed point to canonical point.
    pub fn invert(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let n = p.norm();
        if self.is_identity() || n == 0.0 {
            return *p;
        }
        p / self.radial_factor(&(p / n))
    }
}

/// An object instance: a union of solids, its deformation, and the seed of
/// the descriptor field painted on its canonical surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub primitives: Vec<Primitive>,
    pub descriptor_dim: usize,
    pub descriptor_seed: u64,
    #[serde(default)]
    pub warp: Warp,
}

/// Where a ray meets the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    /// Ray parameter; equals camera-frame z-depth for rays with unit z.
    pub distance: f64,
    pub world: Vector3<f64>,
    /// Undeformed surface coordinate.
    pub canonical: Vector3<f64>,
}

impl SyntheticScene {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.primitives.is_empty() {
            return Err(SynthError::InvalidScene("scene has no primitives".into()));
        }
        if let Some(i) = self.primitives.iter().position(|p| !p.is_valid()) {
            return Err(SynthError::InvalidScene(format!("primitive {i} has invalid parameters")));
        }
        if !(self.warp.amplitude.abs() < 0.5 && self.warp.frequency.is_finite()) {
            return Err(SynthError::InvalidScene(format!(
                "warp amplitude {} must be below 0.5 in magnitude",
                self.warp.amplitude
            )));
        }
        let extent = self.canonical_radius() * (1.0 + self.warp.amplitude.abs());
        if extent > 1.0 {
            return Err(SynthError::InvalidScene(format!(
                "scene extends to radius {extent:.3}, outside the unit ball"
            )));
        }
        Ok(())
    }

    fn canonical_radius(&self) -> f64 {
        self.primitives.iter().map(Primitive::bounding_radius).fold(0.0, f64::max)
    }

    pub fn with_warp(&self, warp: Warp) -> Self {
        Self { warp, ..self.clone() }
    }

    /// Negative inside the deformed solid.
    pub fn inside_measure(&self, p: &Vector3<f64>) -> f64 {
        let c = self.warp.invert(p);
        self.primitives.iter().map(|s| s.inside_measure(&c)).fold(f64::INFINITY, f64::min)
    }

    /// Nearest surface hit along `origin + s·dir`, `s > 0`.
    pub fn cast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<SurfaceHit> {
        let s = if self.warp.is_identity() {
            self.primitives.iter().filter_map(|p| p.intersect(origin, dir)).min_by(f64::total_cmp)?
        } else {
            self.march(origin, dir)?
        };
        let world = origin + dir * s;
        Some(SurfaceHit { distance: s, world, canonical: self.warp.invert(&world) })
    }

    fn march(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        // Restrict to the segment inside the unit ball that bounds the scene.
        let a = dir.norm_squared();
        let b = origin.dot(dir);
        let c = origin.norm_squared() - 1.0;
        let disc = b * b - a * c;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        let s_in = ((-b - sq) / a).max(MIN_HIT_DISTANCE);
        let s_out = (-b + sq) / a;
        if s_out <= s_in {
            return None;
        }
        let step = MARCH_STEP / a.sqrt();
        let f = |s: f64| self.inside_measure(&(origin + dir * s));
        let mut prev_s = s_in;
        if f(prev_s) < 0.0 {
            return Some(prev_s);
        }
        let n = ((s_out - s_in) / step).ceil() as usize;
        for i in 1..=n {
            let s = (s_in + i as f64 * step).min(s_out);
            if f(s) < 0.0 {
                let (mut lo, mut hi) = (prev_s, s);
                for _ in 0..BISECTION_STEPS {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some(hi);
            }
            prev_s = s;
        }
        None
    }

    /// A few overlapping solids placed asymmetrically inside radius 0.8.
    pub fn random(seed: u64, descriptor_dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut primitives = vec![Primitive::Box {
            center: Vector3::zeros(),
            half_extents: Vector3::new(rng.gen_range(0.25..0.4), rng.gen_range(0.15..0.3), rng.gen_range(0.1..0.25)),
        }];
        let extra = rng.gen_range(1..=3);
        while primitives.len() < 1 + extra {
            let dir = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if dir.norm() < 0.2 {
                continue;
            }
            let center = dir.normalize() * rng.gen_range(0.25..0.45);
            let p = if rng.gen_bool(0.5) {
                Primitive::Sphere { center, radius: rng.gen_range(0.1..0.25) }
            } else {
                Primitive::Box {
                    center,
                    half_extents: Vector3::new(
                        rng.gen_range(0.05..0.2),
                        rng.gen_range(0.05..0.2),
                        rng.gen_range(0.05..0.2),
                    ),
                }
            };
            if p.bounding_radius() <= 0.8 {
                primitives.push(p);
            }
        }
        Self { primitives, descriptor_dim, descriptor_seed: rng.gen(), warp: Warp::default() }
    }
}
