//! JSON dataset manifest: intrinsics, posed reference views with depth and
//! feature files, and query views with ground truth.
//!
//! Poses are world→camera (`x_cam = R·X + t`), rotation stored as 9 row-major
//! values. Angles are radians. File paths are relative to the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::container::write_bytes;
use super::{FormatError, ManifestError};
use crate::geometry::{spherical_to_pose, CameraIntrinsics, RigidPose, SphericalCamera};
use crate::synth::{GridSpec, SyntheticScene, Warp};
use nalgebra::{Matrix3, Vector3};

pub const MANIFEST_FORMAT: &str = "catpose-manifest";
pub const MANIFEST_VERSION: u32 = 1;
pub const EXTRINSICS_CONVENTION: &str = "world_to_camera";
pub const ANGLE_UNITS: &str = "radians";

/// Reference camera centres must match their spherical encoding this closely,
/// relative to the radius.
const SPHERICAL_CONSISTENCY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    /// Row-major world→camera rotation.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl From<&RigidPose> for PoseRecord {
    fn from(p: &RigidPose) -> Self {
        let r = &p.rotation;
        Self {
            rotation: std::array::from_fn(|i| r[(i / 3, i % 3)]),
            translation: [p.translation.x, p.translation.y, p.translation.z],
        }
    }
}

impl PoseRecord {
    pub fn to_pose(&self) -> Result<RigidPose, crate::geometry::GeometryError> {
        RigidPose::new(Matrix3::from_row_slice(&self.rotation), Vector3::from(self.translation))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub extrinsics: String,
    pub angle_units: String,
    pub camera_axes: String,
    pub depth: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            extrinsics: EXTRINSICS_CONVENTION.into(),
            angle_units: ANGLE_UNITS.into(),
            camera_axes: "x_right_y_down_z_forward".into(),
            depth: "z_depth_meters".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceView {
    pub id: String,
    pub spherical: SphericalCamera,
    pub pose: PoseRecord,
    pub depth: String,
    pub features: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryView {
    pub id: String,
    #[serde(default = "default_category")]
    pub category: String,
    /// Ground truth.
    pub pose: PoseRecord,
    pub features: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<String>,
    /// Deformation of this query instance relative to the canonical object.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warp: Option<Warp>,
}

fn default_category() -> String {
    "object".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub conventions: Conventions,
    pub intrinsics: CameraIntrinsics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SyntheticScene>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub references: Vec<ReferenceView>,
    pub queries: Vec<QueryView>,
    /// Directory that relative file paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.base_dir.join(relative)
    }

    pub fn query(&self, id: &str) -> Option<(usize, &QueryView)> {
        self.queries.iter().enumerate().find(|(_, q)| q.id == id)
    }

    pub fn reference_pose(&self, index: usize) -> RigidPose {
        self.references[index].pose.to_pose().expect("validated on load")
    }

    /// Semantic checks beyond the JSON schema; each failure names its field.
    pub fn validate(&self, check_files: bool) -> Result<(), ManifestError> {
        let err = |path: String, message: String| Err(ManifestError::Schema { path, message });
        if self.format != MANIFEST_FORMAT {
            return err("format".into(), format!("expected \"{MANIFEST_FORMAT}\", got \"{}\"", self.format));
        }
        if self.version != MANIFEST_VERSION {
            return err("version".into(), format!("unsupported version {}", self.version));
        }
        if self.conventions.extrinsics != EXTRINSICS_CONVENTION {
            return err(
                "conventions.extrinsics".into(),
                format!("only \"{EXTRINSICS_CONVENTION}\" is supported"),
            );
        }
        if self.conventions.angle_units != ANGLE_UNITS {
            return err("conventions.angle_units".into(), format!("only \"{ANGLE_UNITS}\" is supported"));
        }
        if let Err(e) = self.intrinsics.validate() {
            return err("intrinsics".into(), e.to_string());
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return err("noise_sd".into(), "must be finite and non-negative".into());
        }
        if let Some(scene) = &self.scene {
            if let Err(e) = scene.validate() {
                return err("scene".into(), e.to_string());
            }
        }
        if self.references.is_empty() {
            return err("references".into(), "at least one reference view is required".into());
        }
        let mut ids = std::collections::HashSet::new();
        for (i, r) in self.references.iter().enumerate() {
            let at = format!("references[{i}]");
            if !ids.insert(r.id.as_str()) {
                return err(format!("{at}.id"), format!("duplicate id \"{}\"", r.id));
            }
            let pose = match r.pose.to_pose() {
                Ok(p) => p,
                Err(e) => return err(format!("{at}.pose"), e.to_string()),
            };
            let s = match SphericalCamera::new(r.spherical.theta, r.spherical.phi, r.spherical.radius) {
                Ok(s) => s,
                Err(e) => return err(format!("{at}.spherical"), e.to_string()),
            };
            let expected = spherical_to_pose(&s);
            let gap = (expected.center() - pose.center()).norm();
            if gap > SPHERICAL_CONSISTENCY_TOL * s.radius {
                return err(format!("{at}.spherical"), format!("camera centre differs from pose by {gap:e}"));
            }
            if check_files {
                self.check_file(&format!("{at}.depth"), &r.depth)?;
                self.check_file(&format!("{at}.features"), &r.features)?;
            }
        }
        let mut ids = std::collections::HashSet::new();
        for (i, q) in self.queries.iter().enumerate() {
            let at = format!("queries[{i}]");
            if !ids.insert(q.id.as_str()) {
                return err(format!("{at}.id"), format!("duplicate id \"{}\"", q.id));
            }
            if let Err(e) = q.pose.to_pose() {
                return err(format!("{at}.pose"), e.to_string());
            }
            if check_files {
                self.check_file(&format!("{at}.features"), &q.features)?;
                if let Some(d) = &q.depth {
                    self.check_file(&format!("{at}.depth"), d)?;
                }
            }
        }
        Ok(())
    }

    fn check_file(&self, field: &str, rel: &str) -> Result<(), ManifestError> {
        let p = self.resolve(rel);
        if !p.is_file() {
            return Err(ManifestError::Schema {
                path: field.to_string(),
                message: format!("file {} does not exist", p.display()),
            });
        }
        Ok(())
    }
}

/// Parses a manifest from JSON text, naming the offending field on failure.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<DatasetManifest, ManifestError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut manifest: DatasetManifest = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner().to_string();
        let mut path = e.path().to_string();
        if let Some(field) = missing_field(&inner) {
            path = if path == "." || path.is_empty() { field.to_string() } else { format!("{path}.{field}") };
        }
        if e.inner().is_syntax() || e.inner().is_eof() {
            ManifestError::Syntax(inner)
        } else {
            ManifestError::Schema { path, message: inner }
        }
    })?;
    manifest.base_dir = base_dir.to_path_buf();
    Ok(manifest)
}

fn missing_field(msg: &str) -> Option<&str> {
    let rest = msg.strip_prefix("missing field `")?;
    rest.split('`').next()
}

/// Reads and validates a manifest, including existence of every referenced file.
pub fn read_manifest(path: &Path) -> Result<DatasetManifest, ManifestError> {
    let text = fs::read_to_string(path)
        .map_err(|source| ManifestError::Io(FormatError::Io { path: path.to_path_buf(), source }))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = parse_manifest(&text, &base)?;
    manifest.validate(true)?;
    Ok(manifest)
}

pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<(), FormatError> {
    let mut text = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    text.push(b'\n');
    write_bytes(path, &text)
}
