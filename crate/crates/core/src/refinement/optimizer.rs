use super::loss::{evaluate, pack, unpack, Params};
use super::{OptimizerConfig, RefineError, RefinementProblem, RefinementResult, DIVERGENCE_LOSS, SCALE_NOTE};
use crate::geometry::{matrix_to_rot6d, rot6d_to_matrix, RigidPose};

/// Bias-corrected adaptive-moment update over a fixed-size parameter vector.
#[derive(Debug, Clone)]
pub struct Adam<const N: usize> {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: [f64; N],
    v: [f64; N],
    t: i32,
}

impl<const N: usize> Adam<N> {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { lr, beta1, beta2, eps, m: [0.0; N], v: [0.0; N], t: 0 }
    }

    pub fn reset(&mut self) {
        self.m = [0.0; N];
        self.v = [0.0; N];
        self.t = 0;
    }

    pub fn step(&mut self, params: &mut [f64; N], grad: &[f64; N]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..N {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Minimizes the reprojection loss starting from the problem's coarse pose.
///
/// Every iterate's loss is recorded; the lowest-loss iterate is returned. An
/// iteration counts as improving when it lowers the best loss by at least
/// `early_stop_rel_tol` relative. Every `lr_decay_patience` non-improving
/// iterations in a row the step size is multiplied by `lr_decay` and the
/// search restarts from the best iterate; after `early_stop_patience` the run
/// stops.
pub fn refine_pose(prob: &RefinementProblem, cfg: &OptimizerConfig) -> Result<RefinementResult, RefineError> {
    cfg.validate()?;
    prob.validate(cfg.min_correspondences)?;

    let rot0 = matrix_to_rot6d(&prob.initial_pose.rotation)?;
    let mut params: Params = pack(&rot0, &prob.initial_pose.translation);
    let mut adam = Adam::<9>::new(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps_adam);

    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut best = (f64::INFINITY, params, 0usize);
    let mut stall = 0usize;
    let mut converged = false;

    for iteration in 0..cfg.max_iters {
        let (loss, grad) = evaluate(&params, prob, cfg.loss_smoothing_eps, true)?;
        if loss > DIVERGENCE_LOSS {
            return Err(RefineError::Diverged { iteration, loss });
        }
        trace.push(loss);

        let improved = loss < best.0 * (1.0 - cfg.early_stop_rel_tol);
        if loss < best.0 {
            best = (loss, params, iteration);
        }
        if improved {
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.early_stop_patience {
                converged = true;
                break;
            }
            if stall % cfg.lr_decay_patience == 0 {
                // Restart from the best iterate with a smaller step and fresh moments.
                adam.lr *= cfg.lr_decay;
                adam.reset();
                params = best.1;
                continue;
            }
        }
        if iteration + 1 < cfg.max_iters {
            adam.step(&mut params, &grad);
        }
    }

    let (best_loss, best_params, best_iteration) = best;
    let (rot, t) = unpack(&best_params);
    let rotation = rot6d_to_matrix(&rot)?;
    Ok(RefinementResult {
        pose: RigidPose { rotation, translation: t },
        rotation_6d: rot,
        iterations_run: trace.len(),
        loss_trace: trace,
        best_loss,
        best_iteration,
        converged,
        scale_note: SCALE_NOTE.to_string(),
    })
}
