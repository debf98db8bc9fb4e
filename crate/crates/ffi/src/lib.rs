//! C ABI for the crosspose solver.
//!
//! Callers build an opaque problem handle from flat `double` arrays, solve
//! it, and free it. Every fallible entry point returns a [`CrossposeStatus`];
//! on failure, [`crosspose_last_error_message`] describes the cause. The
//! generated header lands in `include/crosspose.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};

use crosspose::geometry::{PointCloud, RigidTransform};
use crosspose::solver::{
    objective_value, solve_weighted_pose, CrossPoseProblem, DemeanMode, FlowWeighting,
    SolverOptions,
};
use crosspose::Error;
use nalgebra::Vector3;

/// Status code returned by every fallible entry point; `OK` is zero.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossposeStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Inputs were rejected (shape mismatch, non-finite values, bad weights,
    /// blend outside [0, 1], or an out-of-range mode constant).
    InvalidArgument = 2,
    /// The weighted point stacks do not pin down a rotation.
    DegenerateGeometry = 3,
}

/// De-meaning mode; pass as the `mode` argument of `crosspose_solve`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossposeMode {
    /// Subtract weighted centroids before the SVD (the default solver).
    Demean = 0,
    /// Build the covariance from raw, un-centered stacks. Diagnostic only.
    PaperLiteral = 1,
}

/// Goal-flow row weighting; pass as the `flow_weighting` argument of
/// `crosspose_solve`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossposeFlowWeighting {
    /// Every flow row carries weight `w`.
    PaperLiteral = 0,
    /// Flow rows carry `w / n_action`, balancing the normalized alphas.
    Normalized = 1,
}

/// Opaque problem handle. Create with `crosspose_problem_new`, release with
/// `crosspose_problem_free`.
pub struct CrossposeProblem(CrossPoseProblem);

/// Solver output. `rotation` is row major; `singular_values` are sorted
/// descending. `degenerate` mirrors the solver's near-tie flag: the returned
/// pose is still optimal, but the rotation is not unique.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct CrossposeSolution {
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub objective: f64,
    pub singular_values: [f64; 3],
    pub degenerate: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: String) {
    let message = CString::new(message)
        .unwrap_or_else(|_| CString::new("error message contained a NUL byte").expect("no NUL"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
}

fn fail(err: &Error) -> CrossposeStatus {
    set_last_error(err.to_string());
    match err {
        Error::DegenerateGeometry => CrossposeStatus::DegenerateGeometry,
        _ => CrossposeStatus::InvalidArgument,
    }
}

fn null_arg(name: &str) -> CrossposeStatus {
    set_last_error(format!("{name} must not be null"));
    CrossposeStatus::NullPointer
}

fn invalid(message: &str) -> CrossposeStatus {
    set_last_error(message.to_string());
    CrossposeStatus::InvalidArgument
}

fn mode_from(raw: u32) -> Option<DemeanMode> {
    match raw {
        0 => Some(DemeanMode::Demean),
        1 => Some(DemeanMode::PaperLiteral),
        _ => None,
    }
}

fn weighting_from(raw: u32) -> Option<FlowWeighting> {
    match raw {
        0 => Some(FlowWeighting::PaperLiteralWeighting),
        1 => Some(FlowWeighting::NormalizedWeighting),
        _ => None,
    }
}

/// # Safety
/// `ptr` must be non-null and readable for `3 * n` doubles.
unsafe fn points(ptr: *const f64, n: usize) -> Vec<Vector3<f64>> {
    std::slice::from_raw_parts(ptr, 3 * n)
        .chunks_exact(3)
        .map(|xyz| Vector3::new(xyz[0], xyz[1], xyz[2]))
        .collect()
}

/// Message from the most recent failing call on this thread; empty if no
/// call has failed yet. The pointer stays valid until the next failing call
/// on the same thread.
#[no_mangle]
pub extern "C" fn crosspose_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Builds a problem from flat arrays and writes a handle to `out`.
///
/// Point arrays are packed xyz triples: `action_points`, `corr_action` and
/// `goal_flow` hold `3 * n_action` doubles; `anchor_points` and
/// `corr_anchor` hold `3 * n_anchor`. `alpha_action` and `alpha_anchor` hold
/// `n_action` and `n_anchor` importance weights (nonnegative, positive sum;
/// normalized internally). `goal_flow` is the per-point displacement field
/// on the action cloud and `blend` the correspondence/flow mix in [0, 1].
///
/// The handle must be released with `crosspose_problem_free`.
///
/// # Safety
/// All pointers must be non-null and readable for the lengths above, and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn crosspose_problem_new(
    action_points: *const f64,
    n_action: usize,
    anchor_points: *const f64,
    n_anchor: usize,
    corr_action: *const f64,
    corr_anchor: *const f64,
    alpha_action: *const f64,
    alpha_anchor: *const f64,
    goal_flow: *const f64,
    blend: f64,
    out: *mut *mut CrossposeProblem,
) -> CrossposeStatus {
    macro_rules! require_non_null {
        ($ptr:ident) => {
            if $ptr.is_null() {
                return null_arg(stringify!($ptr));
            }
        };
    }
    require_non_null!(action_points);
    require_non_null!(anchor_points);
    require_non_null!(corr_action);
    require_non_null!(corr_anchor);
    require_non_null!(alpha_action);
    require_non_null!(alpha_anchor);
    require_non_null!(goal_flow);
    require_non_null!(out);

    let action = match PointCloud::new(points(action_points, n_action)) {
        Ok(cloud) => cloud,
        Err(err) => return fail(&err),
    };
    let anchor = match PointCloud::new(points(anchor_points, n_anchor)) {
        Ok(cloud) => cloud,
        Err(err) => return fail(&err),
    };
    let problem = CrossPoseProblem::new(
        action,
        anchor,
        points(corr_action, n_action),
        points(corr_anchor, n_anchor),
        std::slice::from_raw_parts(alpha_action, n_action).to_vec(),
        std::slice::from_raw_parts(alpha_anchor, n_anchor).to_vec(),
        points(goal_flow, n_action),
        blend,
    );
    match problem {
        Ok(problem) => {
            out.write(Box::into_raw(Box::new(CrossposeProblem(problem))));
            CrossposeStatus::Ok
        }
        Err(err) => fail(&err),
    }
}

/// Releases a handle from `crosspose_problem_new`. Null is a no-op.
///
/// # Safety
/// `problem` must be a handle returned by `crosspose_problem_new` that has
/// not already been freed.
#[no_mangle]
pub unsafe extern "C" fn crosspose_problem_free(problem: *mut CrossposeProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Solves the problem in closed form and writes the result to `out`.
///
/// `mode` takes a `CrossposeMode` value and `flow_weighting` a
/// `CrossposeFlowWeighting` value; pass 0 for both to get the default
/// solver.
///
/// # Safety
/// `problem` must be a live handle from `crosspose_problem_new` and `out`
/// must point to writable space for one `CrossposeSolution`.
#[no_mangle]
pub unsafe extern "C" fn crosspose_solve(
    problem: *const CrossposeProblem,
    mode: u32,
    flow_weighting: u32,
    out: *mut CrossposeSolution,
) -> CrossposeStatus {
    if problem.is_null() {
        return null_arg("problem");
    }
    if out.is_null() {
        return null_arg("out");
    }
    let Some(mode) = mode_from(mode) else {
        return invalid("mode is not a CrossposeMode value");
    };
    let Some(flow_weighting) = weighting_from(flow_weighting) else {
        return invalid("flow_weighting is not a CrossposeFlowWeighting value");
    };
    let options = SolverOptions {
        mode,
        flow_weighting,
    };
    match solve_weighted_pose(&(*problem).0, options) {
        Ok(report) => {
            out.write(CrossposeSolution {
                rotation: report.transform.rotation_row_major(),
                translation: report.transform.translation_array(),
                objective: report.objective,
                singular_values: report.singular_values,
                degenerate: report.degenerate_flag,
            });
            CrossposeStatus::Ok
        }
        Err(err) => fail(&err),
    }
}

/// Evaluates the blended objective at a caller-supplied pose and writes it
/// to `out`. `rotation` is nine doubles row major (must be a proper
/// rotation), `translation` three doubles.
///
/// # Safety
/// `problem` must be a live handle from `crosspose_problem_new`, `rotation`
/// readable for 9 doubles, `translation` for 3, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn crosspose_objective(
    problem: *const CrossposeProblem,
    rotation: *const f64,
    translation: *const f64,
    out: *mut f64,
) -> CrossposeStatus {
    if problem.is_null() {
        return null_arg("problem");
    }
    if rotation.is_null() {
        return null_arg("rotation");
    }
    if translation.is_null() {
        return null_arg("translation");
    }
    if out.is_null() {
        return null_arg("out");
    }
    let rot: [f64; 9] = std::slice::from_raw_parts(rotation, 9)
        .try_into()
        .expect("slice of length 9");
    let tr: [f64; 3] = std::slice::from_raw_parts(translation, 3)
        .try_into()
        .expect("slice of length 3");
    match RigidTransform::from_row_major(&rot, &tr) {
        Ok(transform) => {
            out.write(objective_value(&(*problem).0, &transform));
            CrossposeStatus::Ok
        }
        Err(err) => fail(&err),
    }
}
