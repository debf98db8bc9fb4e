//! Batch evaluation: solve scenario bundles over a (w, mode) grid, compare
//! against ground truth and the numerical oracle, and aggregate group means.

use crate::geometry::metric_triple;
use crate::io::{MetricsRow, SweepRow};
use crate::oracle::minimize_objective;
use crate::solver::{solve_weighted_pose, DemeanMode, FlowWeighting, SolverOptions};
use crate::synthetic::{corrupt, CorruptionKind, ScenarioBundle};
use crate::Result;

#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub w_grid: Vec<f64>,
    pub modes: Vec<DemeanMode>,
    pub flow_weighting: FlowWeighting,
    pub oracle_restarts: usize,
    pub oracle_iters: usize,
    pub oracle_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            w_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            modes: vec![DemeanMode::Demean],
            flow_weighting: FlowWeighting::default(),
            oracle_restarts: 8,
            oracle_iters: crate::oracle::DEFAULT_MAX_ITERS,
            oracle_seed: 0,
        }
    }
}

/// All grid rows for one bundle. `oracle_gap` is solver objective minus
/// oracle objective, so anything above +1e-6 means the closed form lost to
/// the numerical minimizer.
pub fn eval_bundle(id: &str, bundle: &ScenarioBundle, cfg: &EvalConfig) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::with_capacity(cfg.w_grid.len() * cfg.modes.len());
    for &w in &cfg.w_grid {
        let problem = bundle.problem.with_blend(w)?;
        let oracle = minimize_objective(
            &problem,
            cfg.oracle_restarts,
            cfg.oracle_iters,
            cfg.oracle_seed,
        )?;
        for &mode in &cfg.modes {
            let report = solve_weighted_pose(
                &problem,
                SolverOptions {
                    mode,
                    flow_weighting: cfg.flow_weighting,
                },
            )?;
            let metrics = metric_triple(&report.transform, &bundle.gt, bundle.problem.action_cloud());
            rows.push(MetricsRow {
                scenario_id: id.to_string(),
                kind: bundle.kind.as_str().to_string(),
                w,
                mode: mode.as_str().to_string(),
                rot_err_deg: metrics.rot_err_deg,
                trans_err: metrics.trans_err,
                pp_mse: metrics.pp_mse,
                objective: report.objective,
                oracle_gap: report.objective - oracle.objective,
            });
        }
    }
    Ok(rows)
}

/// Rows for every bundle, sorted by (scenario_id, w, mode) so output bytes do
/// not depend on input order.
pub fn eval_bundles(items: &[(String, ScenarioBundle)], cfg: &EvalConfig) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    for (id, bundle) in items {
        rows.extend(eval_bundle(id, bundle, cfg)?);
    }
    sort_rows(&mut rows);
    Ok(rows)
}

fn sort_rows(rows: &mut [MetricsRow]) {
    rows.sort_by(|a, b| {
        a.scenario_id
            .cmp(&b.scenario_id)
            .then(a.w.total_cmp(&b.w))
            .then(a.mode.cmp(&b.mode))
    });
}

/// Corruption sweep: evaluate every bundle at every corruption level. Level
/// order follows the argument; rows within a level are sorted as in
/// [`eval_bundles`].
pub fn sweep_bundles(
    items: &[(String, ScenarioBundle)],
    kind: CorruptionKind,
    levels: &[f64],
    cfg: &EvalConfig,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &level in levels {
        let corrupted: Vec<(String, ScenarioBundle)> = items
            .iter()
            .map(|(id, bundle)| Ok((id.clone(), corrupt(bundle, kind, level)?)))
            .collect::<Result<_>>()?;
        rows.extend(
            eval_bundles(&corrupted, cfg)?
                .into_iter()
                .map(|row| SweepRow::new(row, kind.as_str().to_string(), level)),
        );
    }
    Ok(rows)
}

/// Mean metrics over scenarios sharing (kind, w, mode).
#[derive(Clone, Debug, PartialEq)]
pub struct GroupSummary {
    pub kind: String,
    pub w: f64,
    pub mode: String,
    pub mean_rot_err_deg: f64,
    pub mean_trans_err: f64,
    pub mean_pp_mse: f64,
    pub mean_oracle_gap: f64,
    pub count: usize,
}

pub fn group_means(rows: &[MetricsRow]) -> Vec<GroupSummary> {
    let mut keys: Vec<(String, f64, String)> = rows
        .iter()
        .map(|r| (r.kind.clone(), r.w, r.mode.clone()))
        .collect();
    keys.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    keys.dedup();
    keys.into_iter()
        .map(|(kind, w, mode)| {
            let group: Vec<&MetricsRow> = rows
                .iter()
                .filter(|r| r.kind == kind && r.w == w && r.mode == mode)
                .collect();
            let n = group.len() as f64;
            GroupSummary {
                kind,
                w,
                mode,
                mean_rot_err_deg: group.iter().map(|r| r.rot_err_deg).sum::<f64>() / n,
                mean_trans_err: group.iter().map(|r| r.trans_err).sum::<f64>() / n,
                mean_pp_mse: group.iter().map(|r| r.pp_mse).sum::<f64>() / n,
                mean_oracle_gap: group.iter().map(|r| r.oracle_gap).sum::<f64>() / n,
                count: group.len(),
            }
        })
        .collect()
}

/// Median of a sample; used by stress comparisons where outliers are the
/// whole point.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    }
}
