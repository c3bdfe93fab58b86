//! Online pose refinement against 2D–3D correspondences.
//!
//! The query pose is parameterized by a [`Rotation6D`] and a translation and
//! fitted by minimizing the summed reprojection distance of lifted reference
//! points against their matched query pixels with adaptive-moment gradient
//! steps. The translation inherits the scale of the reference points;
//! [`recover_scale`] fixes it from metric query depth when available.

mod loss;
mod optimizer;
mod scale;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{CameraIntrinsics, GeometryError, RigidPose};

pub use loss::{
    evaluate, loss_gradient, pack, reprojection_loss, unpack, Params, BEHIND_CAMERA_PENALTY, DEFAULT_SMOOTHING_EPS,
    DEPTH_CLAMP,
};
pub use optimizer::{refine_pose, Adam};
pub use scale::{recover_scale, DepthSample, SCALE_PIXEL_TOLERANCE};

/// Loss above which the run is reported as diverged.
pub const DIVERGENCE_LOSS: f64 = 1e12;

pub const SCALE_NOTE: &str = "translation is metric only if the reference points are metric";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RefineError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
    #[error("optimizer diverged at iteration {iteration} (loss {loss:e})")]
    Diverged { iteration: usize, loss: f64 },
    #[error("loss or gradient became non-finite")]
    NonFinite,
    #[error("no usable depth samples for scale recovery")]
    NoDepthSamples,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A query pixel paired with the world point lifted from its reference match.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence2D3D {
    pub query_px: Vector2<f64>,
    pub ref_world: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementProblem {
    pub intrinsics_q: CameraIntrinsics,
    pub correspondences: Vec<Correspondence2D3D>,
    /// Coarse pose, typically that of the best reference view.
    pub initial_pose: RigidPose,
}

impl RefinementProblem {
    pub fn new(
        intrinsics_q: CameraIntrinsics,
        correspondences: Vec<Correspondence2D3D>,
        initial_pose: RigidPose,
    ) -> Result<Self, RefineError> {
        let p = Self { intrinsics_q, correspondences, initial_pose };
        p.validate(1)?;
        Ok(p)
    }

    pub fn validate(&self, min_correspondences: usize) -> Result<(), RefineError> {
        self.intrinsics_q.validate()?;
        if self.correspondences.len() < min_correspondences {
            return Err(RefineError::InvalidProblem(format!(
                "{} correspondences, at least {min_correspondences} required",
                self.correspondences.len()
            )));
        }
        if let Some(i) = self
            .correspondences
            .iter()
            .position(|c| !(c.query_px.iter().all(|x| x.is_finite()) && c.ref_world.iter().all(|x| x.is_finite())))
        {
            return Err(RefineError::InvalidProblem(format!("correspondence {i} is not finite")));
        }
        RigidPose::new(self.initial_pose.rotation, self.initial_pose.translation)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    /// An iteration improves when it lowers the best loss by at least this fraction.
    pub early_stop_rel_tol: f64,
    /// Consecutive non-improving iterations before stopping.
    pub early_stop_patience: usize,
    pub loss_smoothing_eps: f64,
    /// Non-improving iterations before the step size is multiplied by
    /// `lr_decay` and the search restarts from the best iterate.
    pub lr_decay_patience: usize,
    /// Set to 1 for a constant step size.
    pub lr_decay: f64,
    pub min_correspondences: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            early_stop_rel_tol: 1e-6,
            early_stop_patience: 20,
            loss_smoothing_eps: DEFAULT_SMOOTHING_EPS,
            lr_decay_patience: 5,
            lr_decay: 0.3,
            min_correspondences: 4,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), RefineError> {
        let bad = |m: String| Err(RefineError::InvalidConfig(m));
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1".into());
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("eps_adam", self.eps_adam),
            ("early_stop_rel_tol", self.early_stop_rel_tol),
            ("loss_smoothing_eps", self.loss_smoothing_eps),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name}={v} must be positive"));
            }
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name}={v} must lie in (0, 1)"));
            }
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr_decay={} must lie in (0, 1]", self.lr_decay));
        }
        if self.early_stop_patience < 1 || self.lr_decay_patience < 1 {
            return bad("patience values must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementResult {
    /// Pose at the lowest-loss iterate.
    pub pose: RigidPose,
    /// 6D parameters of that iterate, exactly as optimized.
    pub rotation_6d: crate::geometry::Rotation6D,
    /// Loss evaluated at every iterate, starting with the initial pose.
    pub loss_trace: Vec<f64>,
    pub best_loss: f64,
    pub best_iteration: usize,
    pub iterations_run: usize,
    /// Whether the early-stop criterion fired before `max_iters`.
    pub converged: bool,
    pub scale_note: String,
}
