//! Shared fixtures and independent re-implementations used as test oracles.
//! Everything here is deliberately written from the definitions, not by
//! calling into the code under test.

#![allow(dead_code)]

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crosspose::geometry::{random_transform, PointCloud, RigidTransform};
use crosspose::solver::CrossPoseProblem;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                )
            })
            .collect(),
    )
    .unwrap()
}

/// Cloud confined to the z = 0 plane.
pub fn coplanar_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|_| Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), 0.0))
            .collect(),
    )
    .unwrap()
}

pub fn random_alphas(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.1..1.0)).collect()
}

/// Problem whose correspondences and flow are exactly consistent with a
/// random ground truth. Returns the problem and that ground truth.
pub fn consistent_problem(
    rng: &mut ChaCha8Rng,
    n_a: usize,
    n_b: usize,
    w: f64,
) -> (CrossPoseProblem, RigidTransform) {
    let action = random_cloud(rng, n_a);
    let anchor = random_cloud(rng, n_b);
    consistent_from_clouds(rng, action, anchor, w)
}

pub fn consistent_from_clouds(
    rng: &mut ChaCha8Rng,
    action: PointCloud,
    anchor: PointCloud,
    w: f64,
) -> (CrossPoseProblem, RigidTransform) {
    let gt = random_transform(rng);
    let corr_action = action.points().iter().map(|p| gt.apply_point(p)).collect();
    let corr_anchor = anchor
        .points()
        .iter()
        .map(|p| gt.inverse_apply_point(p))
        .collect();
    let flow = action
        .points()
        .iter()
        .map(|p| gt.apply_point(p) - p)
        .collect();
    let alpha_a = random_alphas(rng, action.len());
    let alpha_b = random_alphas(rng, anchor.len());
    let problem = CrossPoseProblem::new(
        action,
        anchor,
        corr_action,
        corr_anchor,
        alpha_a,
        alpha_b,
        flow,
        w,
    )
    .unwrap();
    (problem, gt)
}

/// Gaussian jitter on correspondences and flow, rebuilding the problem.
pub fn jitter_problem(
    rng: &mut ChaCha8Rng,
    problem: &CrossPoseProblem,
    sigma: f64,
) -> CrossPoseProblem {
    let mut noise = |v: &Vector3<f64>| {
        v + sigma
            * Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            )
    };
    CrossPoseProblem::new(
        problem.action_cloud().clone(),
        problem.anchor_cloud().clone(),
        problem.corr_action().iter().map(&mut noise).collect(),
        problem.corr_anchor().iter().map(&mut noise).collect(),
        problem.alpha_action().to_vec(),
        problem.alpha_anchor().to_vec(),
        problem.goal_flow().iter().map(&mut noise).collect(),
        problem.blend(),
    )
    .unwrap()
}

/// Straight-from-the-definition weighted Procrustes on rows `s_i -> b_i`:
/// weighted centroids, SVD of the weighted cross-covariance, determinant
/// correction on the smallest singular value, centroid-difference translation.
pub fn procrustes(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
    weights: &[f64],
) -> (Matrix3<f64>, Vector3<f64>) {
    let ws: f64 = weights.iter().sum();
    let sc: Vector3<f64> = source
        .iter()
        .zip(weights)
        .map(|(s, g)| *g * s)
        .sum::<Vector3<f64>>()
        / ws;
    let tc: Vector3<f64> = target
        .iter()
        .zip(weights)
        .map(|(t, g)| *g * t)
        .sum::<Vector3<f64>>()
        / ws;
    let mut m = Matrix3::zeros();
    for ((s, t), g) in source.iter().zip(target).zip(weights) {
        m += *g * (s - sc) * (t - tc).transpose();
    }
    let svd = m.svd(true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let v = v_t.transpose();
    let mut k = 0;
    for i in 1..3 {
        if svd.singular_values[i] < svd.singular_values[k] {
            k = i;
        }
    }
    let mut diag = Vector3::new(1.0, 1.0, 1.0);
    diag[k] = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&diag) * u.transpose();
    (r, tc - r * sc)
}

/// Standalone correspondence-only solve: forward rows `p^A -> v^A` with
/// `alpha^A`, reverse rows `v^B -> p^B` with `alpha^B`.
pub fn standalone_taxpose(problem: &CrossPoseProblem) -> (Matrix3<f64>, Vector3<f64>) {
    let mut source: Vec<Vector3<f64>> = problem.action_cloud().points().to_vec();
    let mut target: Vec<Vector3<f64>> = problem.corr_action().to_vec();
    let mut weights: Vec<f64> = problem.alpha_action().to_vec();
    source.extend_from_slice(problem.corr_anchor());
    target.extend_from_slice(problem.anchor_cloud().points());
    weights.extend_from_slice(problem.alpha_anchor());
    procrustes(&source, &target, &weights)
}

/// Standalone flow-only solve: `p -> p + delta`, uniform weights.
pub fn standalone_flow_kabsch(problem: &CrossPoseProblem) -> (Matrix3<f64>, Vector3<f64>) {
    let source: Vec<Vector3<f64>> = problem.action_cloud().points().to_vec();
    let target: Vec<Vector3<f64>> = source
        .iter()
        .zip(problem.goal_flow())
        .map(|(p, d)| p + d)
        .collect();
    let weights = vec![1.0; source.len()];
    procrustes(&source, &target, &weights)
}

/// The displayed objective as three literal loops over raw matrices, with the
/// inverse spelled out as `R^T (p - t)`.
pub fn naive_objective(problem: &CrossPoseProblem, r: &Matrix3<f64>, t: &Vector3<f64>) -> f64 {
    let w = problem.blend();
    let mut term_a = 0.0;
    for i in 0..problem.n_action() {
        let p = problem.action_cloud().points()[i];
        term_a += problem.alpha_action()[i]
            * (r * p + t - problem.corr_action()[i]).norm_squared();
    }
    let mut term_b = 0.0;
    for i in 0..problem.n_anchor() {
        let p = problem.anchor_cloud().points()[i];
        term_b += problem.alpha_anchor()[i]
            * (r.transpose() * (p - t) - problem.corr_anchor()[i]).norm_squared();
    }
    let mut term_f = 0.0;
    for i in 0..problem.n_action() {
        let p = problem.action_cloud().points()[i];
        term_f += (r * p + t - (p + problem.goal_flow()[i])).norm_squared();
    }
    (1.0 - w) * (term_a + term_b) + w * term_f
}

/// Rotation angle between two transforms in radians, by quaternion.
pub fn geodesic_rad(a: &RigidTransform, b: &RigidTransform) -> f64 {
    let rel = a.rotation() * b.rotation().transpose();
    nalgebra::UnitQuaternion::from_matrix(&rel).angle()
}

pub fn hom_apply(m: &nalgebra::Matrix4<f64>, p: &Vector3<f64>) -> Vector3<f64> {
    let q = m * nalgebra::Vector4::new(p.x, p.y, p.z, 1.0);
    Vector3::new(q.x, q.y, q.z)
}

/// Loss recomputations through 4x4 homogeneous matrices and a matrix inverse,
/// sharing no code with the loss implementations.
pub fn loop_disp(
    pred: &RigidTransform,
    gt: &RigidTransform,
    pa: &PointCloud,
    pb: &PointCloud,
) -> f64 {
    let (mp, mg) = (pred.homogeneous(), gt.homogeneous());
    let (ip, ig) = (mp.try_inverse().unwrap(), mg.try_inverse().unwrap());
    let fwd: f64 = pa
        .points()
        .iter()
        .map(|p| (hom_apply(&mp, p) - hom_apply(&mg, p)).norm_squared())
        .sum();
    let bwd: f64 = pb
        .points()
        .iter()
        .map(|p| (hom_apply(&ip, p) - hom_apply(&ig, p)).norm_squared())
        .sum();
    fwd / pa.len() as f64 + bwd / pb.len() as f64
}

pub fn loop_corr(
    corr_a: &[Vector3<f64>],
    corr_b: &[Vector3<f64>],
    gt: &RigidTransform,
    pa: &PointCloud,
    pb: &PointCloud,
) -> f64 {
    let m = gt.homogeneous();
    let inv = m.try_inverse().unwrap();
    let fwd: f64 = pa
        .points()
        .iter()
        .zip(corr_a)
        .map(|(p, v)| (v - hom_apply(&m, p)).norm_squared())
        .sum();
    let bwd: f64 = pb
        .points()
        .iter()
        .zip(corr_b)
        .map(|(p, v)| (v - hom_apply(&inv, p)).norm_squared())
        .sum();
    fwd / pa.len() as f64 + bwd / pb.len() as f64
}

pub fn loop_tf(pred: &RigidTransform, gt: &RigidTransform) -> f64 {
    let (a, b) = (pred.homogeneous(), gt.homogeneous());
    let mut sum = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let d = a[(i, j)] - b[(i, j)];
            sum += d * d;
        }
    }
    sum.sqrt()
}
