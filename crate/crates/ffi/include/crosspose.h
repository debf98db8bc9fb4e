/* C interface for the crosspose rigid cross-pose solver. */

#ifndef CROSSPOSE_H
#define CROSSPOSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible entry point; `OK` is zero.
 */
typedef enum CrossposeStatus {
  CROSSPOSE_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  CROSSPOSE_STATUS_NULL_POINTER = 1,
  /**
   * Inputs were rejected (shape mismatch, non-finite values, bad weights,
   * blend outside [0, 1], or an out-of-range mode constant).
   */
  CROSSPOSE_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The weighted point stacks do not pin down a rotation.
   */
  CROSSPOSE_STATUS_DEGENERATE_GEOMETRY = 3,
} CrossposeStatus;

/**
 * De-meaning mode; pass as the `mode` argument of `crosspose_solve`.
 */
typedef enum CrossposeMode {
  /**
   * Subtract weighted centroids before the SVD (the default solver).
   */
  CROSSPOSE_MODE_DEMEAN = 0,
  /**
   * Build the covariance from raw, un-centered stacks. Diagnostic only.
   */
  CROSSPOSE_MODE_PAPER_LITERAL = 1,
} CrossposeMode;

/**
 * Goal-flow row weighting; pass as the `flow_weighting` argument of
 * `crosspose_solve`.
 */
typedef enum CrossposeFlowWeighting {
  /**
   * Every flow row carries weight `w`.
   */
  CROSSPOSE_FLOW_WEIGHTING_PAPER_LITERAL = 0,
  /**
   * Flow rows carry `w / n_action`, balancing the normalized alphas.
   */
  CROSSPOSE_FLOW_WEIGHTING_NORMALIZED = 1,
} CrossposeFlowWeighting;

/**
 * Opaque problem handle. Create with `crosspose_problem_new`, release with
 * `crosspose_problem_free`.
 */
typedef struct CrossposeProblem CrossposeProblem;

/**
 * Solver output. `rotation` is row major; `singular_values` are sorted
 * descending. `degenerate` mirrors the solver's near-tie flag: the returned
 * pose is still optimal, but the rotation is not unique.
 */
typedef struct CrossposeSolution {
  double rotation[9];
  double translation[3];
  double objective;
  double singular_values[3];
  bool degenerate;
} CrossposeSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message from the most recent failing call on this thread; empty if no
 * call has failed yet. The pointer stays valid until the next failing call
 * on the same thread.
 */
const char *crosspose_last_error_message(void);

/**
 * Builds a problem from flat arrays and writes a handle to `out`.
 *
 * Point arrays are packed xyz triples: `action_points`, `corr_action` and
 * `goal_flow` hold `3 * n_action` doubles; `anchor_points` and
 * `corr_anchor` hold `3 * n_anchor`. `alpha_action` and `alpha_anchor` hold
 * `n_action` and `n_anchor` importance weights (nonnegative, positive sum;
 * normalized internally). `goal_flow` is the per-point displacement field
 * on the action cloud and `blend` the correspondence/flow mix in [0, 1].
 *
 * The handle must be released with `crosspose_problem_free`.
 *
 * # Safety
 * All pointers must be non-null and readable for the lengths above, and
 * `out` must be writable.
 */
enum CrossposeStatus crosspose_problem_new(const double *action_points,
                                           uintptr_t n_action,
                                           const double *anchor_points,
                                           uintptr_t n_anchor,
                                           const double *corr_action,
                                           const double *corr_anchor,
                                           const double *alpha_action,
                                           const double *alpha_anchor,
                                           const double *goal_flow,
                                           double blend,
                                           struct CrossposeProblem **out);

/**
 * Releases a handle from `crosspose_problem_new`. Null is a no-op.
 *
 * # Safety
 * `problem` must be a handle returned by `crosspose_problem_new` that has
 * not already been freed.
 */
void crosspose_problem_free(struct CrossposeProblem *problem);

/**
 * Solves the problem in closed form and writes the result to `out`.
 *
 * `mode` takes a `CrossposeMode` value and `flow_weighting` a
 * `CrossposeFlowWeighting` value; pass 0 for both to get the default
 * solver.
 *
 * # Safety
 * `problem` must be a live handle from `crosspose_problem_new` and `out`
 * must point to writable space for one `CrossposeSolution`.
 */
enum CrossposeStatus crosspose_solve(const struct CrossposeProblem *problem,
                                     uint32_t mode,
                                     uint32_t flow_weighting,
                                     struct CrossposeSolution *out);

/**
 * Evaluates the blended objective at a caller-supplied pose and writes it
 * to `out`. `rotation` is nine doubles row major (must be a proper
 * rotation), `translation` three doubles.
 *
 * # Safety
 * `problem` must be a live handle from `crosspose_problem_new`, `rotation`
 * readable for 9 doubles, `translation` for 3, and `out` writable.
 */
enum CrossposeStatus crosspose_objective(const struct CrossposeProblem *problem,
                                         const double *rotation,
                                         const double *translation,
                                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CROSSPOSE_H */
