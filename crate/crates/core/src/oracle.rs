//! Independent numerical minimizer of the blended objective over SE(3).
//!
//! Used to certify the closed-form solver. Damped Gauss-Newton on a
//! 6-parameter tangent (rotation exponential coordinates composed on the
//! left, plus translation) with a monotone backtracking line search, run from
//! a fixed fan of restarts. Analytic gradients are cross-checked against
//! central differences at every restart; disagreement aborts rather than
//! returning a silently wrong certificate.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{random_rotation, so3_exp, so3_hat, RigidTransform};
use crate::solver::{objective_value, CrossPoseProblem};
use crate::Result;

pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_MAX_ITERS: usize = 500;
/// Step norm below which a restart is declared converged. Two orders tighter
/// than anything the acceptance tolerances ask for.
const STEP_TOL: f64 = 1e-10;
/// Allowed absolute disagreement between the analytic and finite-difference
/// gradients, relative to the gradient scale.
const GRAD_CHECK_TOL: f64 = 1e-5;
const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

#[derive(Clone, Copy, Debug)]
pub struct OracleResult {
    pub transform: RigidTransform,
    pub objective: f64,
    pub restarts_used: usize,
    pub converged: bool,
}

/// The objective as one weighted forward-matching residual stack. Built here
/// directly from the problem, independent of the solver's system builder.
struct ResidualRows {
    source: Vec<Vector3<f64>>,
    target: Vec<Vector3<f64>>,
    weight: Vec<f64>,
}

fn residual_rows(problem: &CrossPoseProblem) -> ResidualRows {
    let w = problem.blend();
    let cw = 1.0 - w;
    let mut rows = ResidualRows {
        source: Vec::new(),
        target: Vec::new(),
        weight: Vec::new(),
    };
    for (p, (v, a)) in problem.action_cloud().points().iter().zip(
        problem
            .corr_action()
            .iter()
            .zip(problem.alpha_action().iter()),
    ) {
        rows.source.push(*p);
        rows.target.push(*v);
        rows.weight.push(cw * a);
    }
    // |R^T (p - t) - v| = |R v + t - p|, so the anchor residuals match forward.
    for (p, (v, a)) in problem.anchor_cloud().points().iter().zip(
        problem
            .corr_anchor()
            .iter()
            .zip(problem.alpha_anchor().iter()),
    ) {
        rows.source.push(*v);
        rows.target.push(*p);
        rows.weight.push(cw * a);
    }
    for (p, d) in problem
        .action_cloud()
        .points()
        .iter()
        .zip(problem.goal_flow().iter())
    {
        rows.source.push(*p);
        rows.target.push(p + d);
        rows.weight.push(w);
    }
    rows
}

/// Gradient (of the full objective, factor 2 included) and Gauss-Newton
/// normal matrix at (R, t). Row Jacobian is `[-hat(R s) | I]`.
fn gradient_and_normal(
    rows: &ResidualRows,
    rotation: &Matrix3<f64>,
    translation: &Vector3<f64>,
) -> (Vector6<f64>, Matrix6<f64>) {
    let mut g_rot = Vector3::zeros();
    let mut g_t = Vector3::zeros();
    let mut h_rr = Matrix3::zeros();
    let mut h_rt = Matrix3::zeros();
    let mut weight_sum = 0.0;
    for ((s, b), gamma) in rows
        .source
        .iter()
        .zip(rows.target.iter())
        .zip(rows.weight.iter())
    {
        let q = rotation * s;
        let r = q + translation - b;
        g_rot += *gamma * q.cross(&r);
        g_t += *gamma * r;
        h_rr += *gamma * (q.norm_squared() * Matrix3::identity() - q * q.transpose());
        h_rt += *gamma * so3_hat(&q);
        weight_sum += *gamma;
    }
    let mut g = Vector6::zeros();
    g.fixed_rows_mut::<3>(0).copy_from(&(2.0 * g_rot));
    g.fixed_rows_mut::<3>(3).copy_from(&(2.0 * g_t));
    let mut h = Matrix6::zeros();
    h.fixed_view_mut::<3, 3>(0, 0).copy_from(&(2.0 * h_rr));
    h.fixed_view_mut::<3, 3>(0, 3).copy_from(&(2.0 * h_rt));
    h.fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&(2.0 * h_rt.transpose()));
    h.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(2.0 * weight_sum * Matrix3::identity()));
    (g, h)
}

fn make_transform(rotation: Matrix3<f64>, translation: Vector3<f64>) -> RigidTransform {
    RigidTransform::new(rotation, translation).expect("iterates stay on SE(3)")
}

/// Central differences of the objective along the six tangent directions:
/// three left-composed rotation axes, then three translation axes.
pub fn finite_difference_gradient(
    problem: &CrossPoseProblem,
    transform: &RigidTransform,
    h: f64,
) -> [f64; 6] {
    assert!(h > 0.0, "step size must be positive");
    let mut grad = [0.0; 6];
    for i in 0..3 {
        let mut axis = Vector3::zeros();
        axis[i] = h;
        let plus = make_transform(so3_exp(&axis) * transform.rotation(), *transform.translation());
        let minus = make_transform(
            so3_exp(&(-axis)) * transform.rotation(),
            *transform.translation(),
        );
        grad[i] = (objective_value(problem, &plus) - objective_value(problem, &minus)) / (2.0 * h);
    }
    for i in 0..3 {
        let mut step = Vector3::zeros();
        step[i] = h;
        let plus = make_transform(*transform.rotation(), transform.translation() + step);
        let minus = make_transform(*transform.rotation(), transform.translation() - step);
        grad[i + 3] =
            (objective_value(problem, &plus) - objective_value(problem, &minus)) / (2.0 * h);
    }
    grad
}

fn check_gradient(problem: &CrossPoseProblem, rows: &ResidualRows, transform: &RigidTransform) {
    let (g, _) = gradient_and_normal(rows, transform.rotation(), transform.translation());
    let fd = finite_difference_gradient(problem, transform, 1e-6);
    let scale = g.amax().max(1.0);
    for i in 0..6 {
        let diff = (g[i] - fd[i]).abs();
        assert!(
            diff <= GRAD_CHECK_TOL * scale,
            "analytic and finite-difference gradients disagree: dim {i}, analytic {}, fd {}, \
             diff {diff:.3e} (scale {scale:.3e})",
            g[i],
            fd[i],
        );
    }
}

struct RestartOutcome {
    transform: RigidTransform,
    objective: f64,
    converged: bool,
}

fn refine(
    problem: &CrossPoseProblem,
    rows: &ResidualRows,
    start_rotation: Matrix3<f64>,
    start_translation: Vector3<f64>,
    max_iters: usize,
) -> RestartOutcome {
    let mut rotation = start_rotation;
    let mut translation = start_translation;
    let mut objective = objective_value(problem, &make_transform(rotation, translation));
    let mut converged = false;

    for _ in 0..max_iters {
        let (g, h) = gradient_and_normal(rows, &rotation, &translation);
        let step = solve_damped(&h, &g);
        let slope = g.dot(&step);
        if slope >= 0.0 {
            // Not a descent direction; numerical floor reached.
            converged = true;
            break;
        }
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let omega = scale * Vector3::new(step[0], step[1], step[2]);
            let delta_t = scale * Vector3::new(step[3], step[4], step[5]);
            let cand_rotation = so3_exp(&omega) * rotation;
            let cand_translation = translation + delta_t;
            let cand =
                objective_value(problem, &make_transform(cand_rotation, cand_translation));
            if cand <= objective + ARMIJO_C * scale * slope {
                rotation = cand_rotation;
                translation = cand_translation;
                objective = cand;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            // No improving step at any scale: stationary to machine precision.
            converged = true;
            break;
        }
        if scale * step.norm() < STEP_TOL {
            converged = true;
            break;
        }
    }

    RestartOutcome {
        transform: make_transform(rotation, translation),
        objective,
        converged,
    }
}

/// Gauss-Newton step with a Levenberg damping ladder for rank-deficient
/// normal matrices (coplanar clouds).
fn solve_damped(h: &Matrix6<f64>, g: &Vector6<f64>) -> Vector6<f64> {
    let rhs = -g;
    let mut lambda = 0.0;
    let base = (h.trace() / 6.0).max(1e-12);
    loop {
        let damped = h + Matrix6::identity() * lambda;
        if let Some(chol) = damped.cholesky() {
            return chol.solve(&rhs);
        }
        lambda = if lambda == 0.0 { 1e-10 * base } else { lambda * 10.0 };
    }
}

/// Best local minimum over the restart fan: identity, 90 and 180 degree
/// rotations about each axis, then seeded random rotations. Each restart
/// starts from the weighted-centroid translation for its rotation.
pub fn minimize_objective(
    problem: &CrossPoseProblem,
    restarts: usize,
    max_iters: usize,
    seed: u64,
) -> Result<OracleResult> {
    assert!(restarts >= 1, "need at least one restart");
    let rows = residual_rows(problem);

    let mut starts: Vec<Matrix3<f64>> = vec![Matrix3::identity()];
    for axis in [Vector3::x(), Vector3::y(), Vector3::z()] {
        for angle in [std::f64::consts::FRAC_PI_2, std::f64::consts::PI] {
            starts.push(so3_exp(&(angle * axis)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while starts.len() < restarts {
        starts.push(random_rotation(&mut rng));
    }
    starts.truncate(restarts);

    let mut best: Option<RestartOutcome> = None;
    for (i, rotation) in starts.into_iter().enumerate() {
        let translation = centroid_translation(&rows, &rotation);
        let start = make_transform(rotation, translation);
        if i == 0 {
            check_gradient(problem, &rows, &start);
        }
        let outcome = refine(problem, &rows, rotation, translation, max_iters);
        let better = match &best {
            None => true,
            Some(b) => outcome.objective < b.objective,
        };
        if better {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least one restart ran");
    let objective = objective_value(problem, &best.transform);
    Ok(OracleResult {
        transform: best.transform,
        objective,
        restarts_used: restarts,
        converged: best.converged,
    })
}

fn centroid_translation(rows: &ResidualRows, rotation: &Matrix3<f64>) -> Vector3<f64> {
    let mut ws = 0.0;
    let mut sc = Vector3::zeros();
    let mut tc = Vector3::zeros();
    for ((s, b), g) in rows
        .source
        .iter()
        .zip(rows.target.iter())
        .zip(rows.weight.iter())
    {
        ws += *g;
        sc += *g * s;
        tc += *g * b;
    }
    if ws <= 0.0 {
        return Vector3::zeros();
    }
    tc / ws - rotation * (sc / ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn damped_solve_handles_singular_normal_matrix() {
        let mut h = Matrix6::zeros();
        h[(0, 0)] = 1.0;
        let mut g = Vector6::zeros();
        g[0] = 2.0;
        let step = solve_damped(&h, &g);
        assert!(step[0] < 0.0);
        assert!(step.iter().all(|x| x.is_finite()));
    }
}
