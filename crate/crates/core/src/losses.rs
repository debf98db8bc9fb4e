//! Evaluation losses over problems with known ground truth.
//!
//! All cloud norms are means over points, so values are comparable across
//! cloud sizes.

use nalgebra::Vector3;

use crate::geometry::{PointCloud, RigidTransform};
use crate::solver::CrossPoseProblem;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBundle {
    pub disp: f64,
    pub corr: f64,
    pub cons: f64,
    pub tf: f64,
}

/// Ground-truth cross-pose from the per-cloud perturbations:
/// `T_beta . T_alpha^-1`.
pub fn ground_truth_transform(t_alpha: &RigidTransform, t_beta: &RigidTransform) -> RigidTransform {
    t_beta.compose(&t_alpha.invert())
}

fn mean_sq<'a>(
    residuals: impl Iterator<Item = (Vector3<f64>, &'a Vector3<f64>)>,
    n: usize,
) -> f64 {
    let sum: f64 = residuals.map(|(a, b)| (a - b).norm_squared()).sum();
    sum / n as f64
}

/// Point displacement loss: mean squared mismatch of the predicted and
/// ground-truth images of the action cloud, plus the same for the anchor
/// cloud under the inverse transforms.
pub fn point_displacement_loss(
    pred: &RigidTransform,
    gt: &RigidTransform,
    action: &PointCloud,
    anchor: &PointCloud,
) -> f64 {
    let forward: f64 = action
        .points()
        .iter()
        .map(|p| (pred.apply_point(p) - gt.apply_point(p)).norm_squared())
        .sum::<f64>()
        / action.len() as f64;
    let backward: f64 = anchor
        .points()
        .iter()
        .map(|p| (pred.inverse_apply_point(p) - gt.inverse_apply_point(p)).norm_squared())
        .sum::<f64>()
        / anchor.len() as f64;
    forward + backward
}

/// Direct correspondence loss against the ground-truth transform.
pub fn correspondence_loss(
    corr_action: &[Vector3<f64>],
    corr_anchor: &[Vector3<f64>],
    gt: &RigidTransform,
    action: &PointCloud,
    anchor: &PointCloud,
) -> f64 {
    debug_assert_eq!(corr_action.len(), action.len());
    debug_assert_eq!(corr_anchor.len(), anchor.len());
    let a = mean_sq(
        action
            .points()
            .iter()
            .map(|p| gt.apply_point(p))
            .zip(corr_action.iter()),
        action.len(),
    );
    let b = mean_sq(
        anchor
            .points()
            .iter()
            .map(|p| gt.inverse_apply_point(p))
            .zip(corr_anchor.iter()),
        anchor.len(),
    );
    a + b
}

/// Consistency loss: the correspondence loss with the predicted transform in
/// place of the ground truth. Needs no ground truth at all.
pub fn consistency_loss(
    corr_action: &[Vector3<f64>],
    corr_anchor: &[Vector3<f64>],
    pred: &RigidTransform,
    action: &PointCloud,
    anchor: &PointCloud,
) -> f64 {
    correspondence_loss(corr_action, corr_anchor, pred, action, anchor)
}

/// Frobenius norm of the difference of the 4x4 homogeneous matrices.
pub fn transform_loss(pred: &RigidTransform, gt: &RigidTransform) -> f64 {
    (pred.homogeneous() - gt.homogeneous()).norm()
}

/// All four losses for a solved problem.
pub fn evaluate(
    problem: &CrossPoseProblem,
    pred: &RigidTransform,
    gt: &RigidTransform,
) -> LossBundle {
    LossBundle {
        disp: point_displacement_loss(pred, gt, problem.action_cloud(), problem.anchor_cloud()),
        corr: correspondence_loss(
            problem.corr_action(),
            problem.corr_anchor(),
            gt,
            problem.action_cloud(),
            problem.anchor_cloud(),
        ),
        cons: consistency_loss(
            problem.corr_action(),
            problem.corr_anchor(),
            pred,
            problem.action_cloud(),
            problem.anchor_cloud(),
        ),
        tf: transform_loss(pred, gt),
    }
}
