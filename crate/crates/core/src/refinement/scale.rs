use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::{RefineError, RefinementProblem, RefinementResult};

/// A depth sample is attached to the correspondence whose query pixel lies
/// closest to it, provided it is within this many pixels.
pub const SCALE_PIXEL_TOLERANCE: f64 = 0.5;

/// Metric camera-frame depth measured at a query pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthSample {
    pub pixel: Vector2<f64>,
    pub depth: f64,
}

/// Median ratio of measured query depth to the depth predicted by the refined
/// pose. Scaling the translation and the model points by it makes the
/// predicted depths agree with the measurements.
pub fn recover_scale(
    result: &RefinementResult,
    samples: &[DepthSample],
    prob: &RefinementProblem,
) -> Result<f64, RefineError> {
    let mut ratios: Vec<f64> = samples
        .iter()
        .filter(|s| s.depth.is_finite() && s.depth > 0.0)
        .filter_map(|s| {
            let (d, c) = prob
                .correspondences
                .iter()
                .map(|c| ((c.query_px - s.pixel).norm(), c))
                .min_by(|a, b| a.0.total_cmp(&b.0))?;
            if d > SCALE_PIXEL_TOLERANCE {
                return None;
            }
            let predicted = result.pose.transform(&c.ref_world).z;
            (predicted > 0.0).then(|| s.depth / predicted)
        })
        .collect();
    if ratios.is_empty() {
        return Err(RefineError::NoDepthSamples);
    }
    ratios.sort_by(f64::total_cmp);
    let n = ratios.len();
    Ok(if n % 2 == 1 { ratios[n / 2] } else { 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]) })
}
