//! The blended weighted-SVD cross-pose solver.
//!
//! The objective couples three residual groups: action correspondences
//! (weights `(1-w) alpha^A`), anchor correspondences under the inverse
//! transform (weights `(1-w) alpha^B`) and the goal-flow targets (weight `w`
//! per point). Because `|R^T (p - t) - v| = |R v + t - p|`, the whole
//! objective is a single weighted point-match problem over a stacked system,
//! so rotation comes from one SVD of the weighted cross-covariance and the
//! translation has a closed form.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};

use crate::geometry::{PointCloud, RigidTransform};
use crate::{Error, Result};

/// `sigma_2 / sigma_1` below this means the weighted cross-covariance has
/// rank < 2 and the rotation is not recoverable.
pub const RANK_RATIO_TOL: f64 = 1e-9;
/// `sigma_2 - sigma_3` below this fraction of `sigma_1` marks a near-tie:
/// the returned rotation still minimizes the objective but is not unique.
pub const TIE_TOL: f64 = 1e-9;

/// Full solver input. Constructed through [`CrossPoseProblem::new`], which
/// validates shapes, normalizes the alpha weights to sum to one per cloud and
/// rejects blend values outside [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct CrossPoseProblem {
    action_cloud: PointCloud,
    anchor_cloud: PointCloud,
    corr_action: Vec<Vector3<f64>>,
    corr_anchor: Vec<Vector3<f64>>,
    alpha_action: Vec<f64>,
    alpha_anchor: Vec<f64>,
    goal_flow: Vec<Vector3<f64>>,
    blend: f64,
}

impl CrossPoseProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        action_cloud: PointCloud,
        anchor_cloud: PointCloud,
        corr_action: Vec<Vector3<f64>>,
        corr_anchor: Vec<Vector3<f64>>,
        alpha_action: Vec<f64>,
        alpha_anchor: Vec<f64>,
        goal_flow: Vec<Vector3<f64>>,
        blend: f64,
    ) -> Result<Self> {
        let n_a = action_cloud.len();
        let n_b = anchor_cloud.len();
        check_rows("corr_action", &corr_action, n_a)?;
        check_rows("corr_anchor", &corr_anchor, n_b)?;
        check_rows("goal_flow", &goal_flow, n_a)?;
        if alpha_action.len() != n_a {
            return Err(Error::ShapeMismatch {
                what: "alpha_action",
                expected: n_a,
                got: alpha_action.len(),
            });
        }
        if alpha_anchor.len() != n_b {
            return Err(Error::ShapeMismatch {
                what: "alpha_anchor",
                expected: n_b,
                got: alpha_anchor.len(),
            });
        }
        if !(0.0..=1.0).contains(&blend) {
            return Err(Error::BlendOutOfRange(blend));
        }
        Ok(Self {
            action_cloud,
            anchor_cloud,
            corr_action,
            corr_anchor,
            alpha_action: normalize_alpha(alpha_action)?,
            alpha_anchor: normalize_alpha(alpha_anchor)?,
            goal_flow,
            blend,
        })
    }

    /// Same problem with a different blend weight (validated).
    pub fn with_blend(&self, blend: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&blend) {
            return Err(Error::BlendOutOfRange(blend));
        }
        let mut p = self.clone();
        p.blend = blend;
        Ok(p)
    }

    pub fn action_cloud(&self) -> &PointCloud {
        &self.action_cloud
    }

    pub fn anchor_cloud(&self) -> &PointCloud {
        &self.anchor_cloud
    }

    pub fn corr_action(&self) -> &[Vector3<f64>] {
        &self.corr_action
    }

    pub fn corr_anchor(&self) -> &[Vector3<f64>] {
        &self.corr_anchor
    }

    pub fn alpha_action(&self) -> &[f64] {
        &self.alpha_action
    }

    pub fn alpha_anchor(&self) -> &[f64] {
        &self.alpha_anchor
    }

    pub fn goal_flow(&self) -> &[Vector3<f64>] {
        &self.goal_flow
    }

    pub fn blend(&self) -> f64 {
        self.blend
    }

    pub fn n_action(&self) -> usize {
        self.action_cloud.len()
    }

    pub fn n_anchor(&self) -> usize {
        self.anchor_cloud.len()
    }
}

fn check_rows(what: &'static str, rows: &[Vector3<f64>], expected: usize) -> Result<()> {
    if rows.len() != expected {
        return Err(Error::ShapeMismatch {
            what,
            expected,
            got: rows.len(),
        });
    }
    if !rows.iter().all(|r| r.iter().all(|x| x.is_finite())) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

fn normalize_alpha(alpha: Vec<f64>) -> Result<Vec<f64>> {
    if !alpha.iter().all(|a| a.is_finite() && *a >= 0.0) {
        return Err(Error::InvalidAlpha);
    }
    let sum: f64 = alpha.iter().sum();
    if sum <= 0.0 {
        return Err(Error::InvalidAlpha);
    }
    // idempotent: weights that already sum to one (e.g. reloaded from disk)
    // keep their bits instead of collecting another rounding
    if (sum - 1.0).abs() <= 1e-12 {
        return Ok(alpha);
    }
    Ok(alpha.into_iter().map(|a| a / sum).collect())
}

/// How the cross-covariance is centered before the SVD.
///
/// `Demean` subtracts the weighted centroids of both stacks and is the mode
/// that actually minimizes the objective; `PaperLiteral` forms the un-centered
/// product (with the de-meaned flow folded into the third target block) and
/// exists for diagnostic comparison only.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DemeanMode {
    #[default]
    Demean,
    PaperLiteral,
}

impl DemeanMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DemeanMode::Demean => "demean",
            DemeanMode::PaperLiteral => "paper-literal",
        }
    }
}

impl fmt::Display for DemeanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DemeanMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "demean" => Ok(DemeanMode::Demean),
            "paper-literal" => Ok(DemeanMode::PaperLiteral),
            _ => Err(Error::InvalidArgument(
                "mode must be `demean` or `paper-literal`",
            )),
        }
    }
}

/// Per-point weight given to the goal-flow rows.
///
/// `PaperLiteralWeighting` gives each of the `N_A` flow rows weight `w`, so
/// the flow block's pull grows with `N_A` relative to the normalized alphas.
/// `NormalizedWeighting` uses `w / N_A`, putting the three groups on equal
/// footing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FlowWeighting {
    #[default]
    PaperLiteralWeighting,
    NormalizedWeighting,
}

impl FlowWeighting {
    pub fn as_str(self) -> &'static str {
        match self {
            FlowWeighting::PaperLiteralWeighting => "paper-literal-weighting",
            FlowWeighting::NormalizedWeighting => "normalized-weighting",
        }
    }
}

impl fmt::Display for FlowWeighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FlowWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-literal-weighting" => Ok(FlowWeighting::PaperLiteralWeighting),
            "normalized-weighting" => Ok(FlowWeighting::NormalizedWeighting),
            _ => Err(Error::InvalidArgument(
                "flow weighting must be `paper-literal-weighting` or `normalized-weighting`",
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolverOptions {
    pub mode: DemeanMode,
    pub flow_weighting: FlowWeighting,
}

/// The stacked weighted point-match system.
///
/// Source rows are `[P_A; V_B; P_A]`, target rows `[V_A; P_B; P_A + flow]`,
/// diagonal weights `[(1-w) alpha^A; (1-w) alpha^B; gamma]`.
#[derive(Clone, Debug)]
pub struct SvdSystem {
    source_stack: Vec<Vector3<f64>>,
    target_stack: Vec<Vector3<f64>>,
    weight_diag: Vec<f64>,
    n_action: usize,
    n_anchor: usize,
}

impl SvdSystem {
    pub fn source_stack(&self) -> &[Vector3<f64>] {
        &self.source_stack
    }

    pub fn target_stack(&self) -> &[Vector3<f64>] {
        &self.target_stack
    }

    pub fn weight_diag(&self) -> &[f64] {
        &self.weight_diag
    }

    pub fn len(&self) -> usize {
        self.weight_diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight_diag.is_empty()
    }

    /// Row ranges of the action-correspondence, anchor-correspondence and
    /// goal-flow blocks.
    pub fn block_ranges(&self) -> [std::ops::Range<usize>; 3] {
        let a = self.n_action;
        let b = self.n_anchor;
        [0..a, a..a + b, a + b..a + b + a]
    }
}

/// Effective per-row weight of the goal-flow block.
fn flow_row_weight(problem: &CrossPoseProblem, weighting: FlowWeighting) -> f64 {
    match weighting {
        FlowWeighting::PaperLiteralWeighting => problem.blend(),
        FlowWeighting::NormalizedWeighting => problem.blend() / problem.n_action() as f64,
    }
}

pub fn build_svd_system(problem: &CrossPoseProblem, options: SolverOptions) -> SvdSystem {
    let n_a = problem.n_action();
    let n_b = problem.n_anchor();
    let w = problem.blend();
    let gamma = flow_row_weight(problem, options.flow_weighting);

    let mut source_stack = Vec::with_capacity(2 * n_a + n_b);
    let mut target_stack = Vec::with_capacity(2 * n_a + n_b);
    let mut weight_diag = Vec::with_capacity(2 * n_a + n_b);

    for (p, (v, a)) in problem.action_cloud().points().iter().zip(
        problem
            .corr_action()
            .iter()
            .zip(problem.alpha_action().iter()),
    ) {
        source_stack.push(*p);
        target_stack.push(*v);
        weight_diag.push((1.0 - w) * a);
    }
    for (p, (v, a)) in problem.anchor_cloud().points().iter().zip(
        problem
            .corr_anchor()
            .iter()
            .zip(problem.alpha_anchor().iter()),
    ) {
        source_stack.push(*v);
        target_stack.push(*p);
        weight_diag.push((1.0 - w) * a);
    }
    let flow_offset = match options.mode {
        DemeanMode::Demean => Vector3::zeros(),
        DemeanMode::PaperLiteral => {
            let mean: Vector3<f64> =
                problem.goal_flow().iter().sum::<Vector3<f64>>() / n_a as f64;
            mean
        }
    };
    for (p, d) in problem
        .action_cloud()
        .points()
        .iter()
        .zip(problem.goal_flow().iter())
    {
        source_stack.push(*p);
        target_stack.push(p + d - flow_offset);
        weight_diag.push(gamma);
    }

    SvdSystem {
        source_stack,
        target_stack,
        weight_diag,
        n_action: n_a,
        n_anchor: n_b,
    }
}

pub(crate) struct RotationSolve {
    pub rotation: Matrix3<f64>,
    pub singular_values: [f64; 3],
    pub degenerate: bool,
}

/// Weighted Kabsch step on the stacked system: SVD of the cross-covariance
/// with the determinant correction keeping the result in SO(3).
pub fn kabsch_rotation(system: &SvdSystem, mode: DemeanMode) -> Result<Matrix3<f64>> {
    Ok(rotation_solve(system, mode)?.rotation)
}

pub(crate) fn rotation_solve(system: &SvdSystem, mode: DemeanMode) -> Result<RotationSolve> {
    let covariance = match mode {
        DemeanMode::Demean => {
            let (sc, tc) = weighted_centroids(system)?;
            let mut m = Matrix3::zeros();
            for ((s, t), g) in system
                .source_stack
                .iter()
                .zip(system.target_stack.iter())
                .zip(system.weight_diag.iter())
            {
                m += *g * (s - sc) * (t - tc).transpose();
            }
            m
        }
        DemeanMode::PaperLiteral => {
            let mut m = Matrix3::zeros();
            for ((s, t), g) in system
                .source_stack
                .iter()
                .zip(system.target_stack.iter())
                .zip(system.weight_diag.iter())
            {
                m += *g * s * t.transpose();
            }
            m
        }
    };

    let (u, sigma, v_t) = sorted_svd3(&covariance);
    if !(sigma[1] > sigma[0] * RANK_RATIO_TOL) {
        return Err(Error::DegenerateGeometry);
    }
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let rotation = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let degenerate = sigma[1] - sigma[2] < TIE_TOL * sigma[0];
    Ok(RotationSolve {
        rotation,
        singular_values: sigma,
        degenerate,
    })
}

pub(crate) fn weighted_centroids(system: &SvdSystem) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let mut ws = 0.0;
    let mut sc = Vector3::zeros();
    let mut tc = Vector3::zeros();
    for ((s, t), g) in system
        .source_stack
        .iter()
        .zip(system.target_stack.iter())
        .zip(system.weight_diag.iter())
    {
        ws += *g;
        sc += *g * s;
        tc += *g * t;
    }
    if ws <= 0.0 {
        return Err(Error::InvalidWeights);
    }
    Ok((sc / ws, tc / ws))
}

/// SVD with singular values sorted descending and the factors permuted to
/// match, so the determinant correction always lands on the smallest value.
fn sorted_svd3(m: &Matrix3<f64>) -> (Matrix3<f64>, [f64; 3], Matrix3<f64>) {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let s = svd.singular_values;
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).expect("singular values are finite"));
    let u = Matrix3::from_columns(&[
        u.column(idx[0]).into_owned(),
        u.column(idx[1]).into_owned(),
        u.column(idx[2]).into_owned(),
    ]);
    let v_t = Matrix3::from_rows(&[
        v_t.row(idx[0]).into_owned(),
        v_t.row(idx[1]).into_owned(),
        v_t.row(idx[2]).into_owned(),
    ]);
    (u, [s[idx[0]], s[idx[1]], s[idx[2]]], v_t)
}

/// Stationary translation at fixed rotation. Weighted sum of the action
/// correspondence pull, the goal-flow pull and the anchor correspondence pull
/// (the anchor term enters as `p^B - R v^B` because those residuals live
/// under the inverse transform), divided by the total weight.
pub fn closed_form_translation(
    problem: &CrossPoseProblem,
    rotation: &Matrix3<f64>,
    flow_weighting: FlowWeighting,
) -> Result<Vector3<f64>> {
    let w = problem.blend();
    let cw = 1.0 - w;
    let gamma = flow_row_weight(problem, flow_weighting);

    let mut numer = Vector3::zeros();
    let mut denom = 0.0;
    for (p, (v, a)) in problem.action_cloud().points().iter().zip(
        problem
            .corr_action()
            .iter()
            .zip(problem.alpha_action().iter()),
    ) {
        numer += cw * a * (v - rotation * p);
        denom += cw * a;
    }
    for (p, d) in problem
        .action_cloud()
        .points()
        .iter()
        .zip(problem.goal_flow().iter())
    {
        numer += gamma * ((p + d) - rotation * p);
        denom += gamma;
    }
    for (p, (v, a)) in problem.anchor_cloud().points().iter().zip(
        problem
            .corr_anchor()
            .iter()
            .zip(problem.alpha_anchor().iter()),
    ) {
        numer += cw * a * (p - rotation * v);
        denom += cw * a;
    }
    if denom <= 0.0 {
        return Err(Error::InvalidWeights);
    }
    Ok(numer / denom)
}

/// Exact evaluation of the blended objective at a transform.
pub fn objective_value(problem: &CrossPoseProblem, transform: &RigidTransform) -> f64 {
    let w = problem.blend();
    let mut corr_action = 0.0;
    for (p, (v, a)) in problem.action_cloud().points().iter().zip(
        problem
            .corr_action()
            .iter()
            .zip(problem.alpha_action().iter()),
    ) {
        corr_action += a * (transform.apply_point(p) - v).norm_squared();
    }
    let mut corr_anchor = 0.0;
    for (p, (v, a)) in problem.anchor_cloud().points().iter().zip(
        problem
            .corr_anchor()
            .iter()
            .zip(problem.alpha_anchor().iter()),
    ) {
        corr_anchor += a * (transform.inverse_apply_point(p) - v).norm_squared();
    }
    let mut flow = 0.0;
    for (p, d) in problem
        .action_cloud()
        .points()
        .iter()
        .zip(problem.goal_flow().iter())
    {
        flow += (transform.apply_point(p) - (p + d)).norm_squared();
    }
    (1.0 - w) * (corr_action + corr_anchor) + w * flow
}

/// Solve result plus conditioning diagnostics.
#[derive(Clone, Copy, Debug)]
pub struct SolveReport {
    pub transform: RigidTransform,
    pub objective: f64,
    pub mode: DemeanMode,
    pub singular_values: [f64; 3],
    pub degenerate_flag: bool,
}

pub fn solve_weighted_pose(
    problem: &CrossPoseProblem,
    options: SolverOptions,
) -> Result<SolveReport> {
    let system = build_svd_system(problem, options);
    let rot = rotation_solve(&system, options.mode)?;
    let translation = closed_form_translation(problem, &rot.rotation, options.flow_weighting)?;
    let transform = RigidTransform::new(rot.rotation, translation)
        .expect("SVD rotation is orthonormal and proper");
    let objective = objective_value(problem, &transform);
    Ok(SolveReport {
        transform,
        objective,
        mode: options.mode,
        singular_values: rot.singular_values,
        degenerate_flag: rot.degenerate,
    })
}

/// Correspondence-only endpoint: the same solve with the blend forced to 0.
pub fn solve_taxpose(problem: &CrossPoseProblem, options: SolverOptions) -> Result<SolveReport> {
    let forced = problem.with_blend(0.0).expect("0 is a valid blend");
    solve_weighted_pose(&forced, options)
}

/// Flow-only endpoint: the same solve with the blend forced to 1.
pub fn solve_goalflow(problem: &CrossPoseProblem, options: SolverOptions) -> Result<SolveReport> {
    let forced = problem.with_blend(1.0).expect("1 is a valid blend");
    solve_weighted_pose(&forced, options)
}
