//! Analytic object scenes with known geometry, rendered to depth maps and
//! feature maps whose descriptors are tied to canonical surface coordinates.

mod dataset;
mod render;
mod scene;

pub use dataset::{make_dataset, DatasetConfig, MANIFEST_FILE};
pub use render::{
    cast_pixel, pixel_ray, render_depth, render_features, DepthMap, DescriptorField, GridSpec, DESCRIPTOR_FREQUENCY,
};
pub use scene::{Primitive, SurfaceHit, SyntheticScene, Warp};

use crate::io::FormatError;
use crate::matching::MatchError;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid depth map: {0}")]
    InvalidDepthMap(String),
    #[error("invalid noise level {0}")]
    InvalidNoise(f64),
    #[error("invalid dataset config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    FeatureMap(#[from] MatchError),
    #[error(transparent)]
    Format(#[from] FormatError),
}
