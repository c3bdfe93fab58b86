//! Sum of smoothed per-point reprojection distances and its analytic gradient
//! with respect to the 6D rotation parameters and the translation.

use nalgebra::{Vector2, Vector3};

use super::{RefineError, RefinementProblem};
use crate::geometry::{rot6d_to_matrix, Rotation6D};

/// Camera-frame depth used in the projection when a point is closer than this.
pub const DEPTH_CLAMP: f64 = 1e-6;
/// Slope of the hinge added per point for depth below [`DEPTH_CLAMP`].
pub const BEHIND_CAMERA_PENALTY: f64 = 1e3;
/// Default `ε` in `sqrt(‖r‖² + ε)`.
pub const DEFAULT_SMOOTHING_EPS: f64 = 1e-12;

/// Optimization variables packed as `[a1, a2, t]`.
pub type Params = [f64; 9];

pub fn pack(rot: &Rotation6D, t: &Vector3<f64>) -> Params {
    let r = rot.to_array();
    [r[0], r[1], r[2], r[3], r[4], r[5], t.x, t.y, t.z]
}

pub fn unpack(p: &Params) -> (Rotation6D, Vector3<f64>) {
    (
        Rotation6D { a1: Vector3::new(p[0], p[1], p[2]), a2: Vector3::new(p[3], p[4], p[5]) },
        Vector3::new(p[6], p[7], p[8]),
    )
}

/// `Σ_k sqrt(‖π(K, R·X_k + t) − x_k‖² + ε)`, plus a hinge for points that fall
/// behind the camera.
pub fn reprojection_loss(rot: &Rotation6D, t: &Vector3<f64>, prob: &RefinementProblem) -> Result<f64, RefineError> {
    evaluate(&pack(rot, t), prob, DEFAULT_SMOOTHING_EPS, false).map(|(l, _)| l)
}

/// Gradient of [`reprojection_loss`] as `[∂a1, ∂a2, ∂t]`.
pub fn loss_gradient(rot: &Rotation6D, t: &Vector3<f64>, prob: &RefinementProblem) -> Result<Params, RefineError> {
    evaluate(&pack(rot, t), prob, DEFAULT_SMOOTHING_EPS, true).map(|(_, g)| g)
}

/// Loss and (optionally) gradient at a packed parameter vector.
pub fn evaluate(params: &Params, prob: &RefinementProblem, eps: f64, with_grad: bool) -> Result<(f64, Params), RefineError> {
    let (rot, t) = unpack(params);
    let r = rot6d_to_matrix(&rot)?;
    let b1: Vector3<f64> = r.column(0).into_owned();
    let b2: Vector3<f64> = r.column(1).into_owned();
    let k = &prob.intrinsics_q;

    let mut loss = 0.0;
    let mut g_b1 = Vector3::zeros();
    let mut g_b2 = Vector3::zeros();
    let mut g_t = Vector3::zeros();

    for c in &prob.correspondences {
        let x = &c.ref_world;
        let p = r * x + t;
        let behind = p.z < DEPTH_CLAMP;
        let z = if behind { DEPTH_CLAMP } else { p.z };
        let px = Vector2::new(k.fx * p.x / z + k.cx, k.fy * p.y / z + k.cy);
        let res = px - c.query_px;
        let s = (res.norm_squared() + eps).sqrt();
        loss += s;
        if behind {
            loss += BEHIND_CAMERA_PENALTY * (DEPTH_CLAMP - p.z);
        }
        if !with_grad {
            continue;
        }
        let gr = res / s;
        let mut gp = Vector3::new(gr.x * k.fx / z, gr.y * k.fy / z, 0.0);
        if behind {
            gp.z = -BEHIND_CAMERA_PENALTY;
        } else {
            gp.z = -(gr.x * k.fx * p.x + gr.y * k.fy * p.y) / (z * z);
        }
        // p = b1·x0 + b2·x1 + (b1 × b2)·x2 + t
        g_t += gp;
        g_b1 += gp * x.x + b2.cross(&gp) * x.z;
        g_b2 += gp * x.y + gp.cross(&b1) * x.z;
    }
    if !loss.is_finite() {
        return Err(RefineError::NonFinite);
    }
    if !with_grad {
        return Ok((loss, [0.0; 9]));
    }

    // Back through Gram–Schmidt: b2 = u2/‖u2‖, u2 = a2 − (b1·a2)·b1, b1 = a1/‖a1‖.
    let u2 = rot.a2 - b1 * b1.dot(&rot.a2);
    let n2 = u2.norm();
    let g_u2 = (g_b2 - b2 * b2.dot(&g_b2)) / n2;
    let g_a2 = g_u2 - b1 * b1.dot(&g_u2);
    let g_b1_total = g_b1 - (g_u2 * b1.dot(&rot.a2) + rot.a2 * b1.dot(&g_u2));
    let n1 = rot.a1.norm();
    let g_a1 = (g_b1_total - b1 * b1.dot(&g_b1_total)) / n1;

    let grad = [g_a1.x, g_a1.y, g_a1.z, g_a2.x, g_a2.y, g_a2.z, g_t.x, g_t.y, g_t.z];
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(RefineError::NonFinite);
    }
    Ok((loss, grad))
}
