//! Scenario JSON files and metrics CSV output.
//!
//! Numbers are serialized in shortest round-trip form, so
//! `parse(serialize(x))` is bit-exact and rerunning a command yields
//! byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{PointCloud, RigidTransform};
use crate::solver::CrossPoseProblem;
use crate::synthetic::{ScenarioBundle, ScenarioKind};
use crate::{Error, Result};

pub const SCENARIO_VERSION: u32 = 1;

/// On-disk scenario schema, version 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub version: u32,
    pub kind: String,
    pub seed: u64,
    pub noise_sigma: f64,
    pub action_points: Vec<[f64; 3]>,
    pub anchor_points: Vec<[f64; 3]>,
    pub corr_action: Vec<[f64; 3]>,
    pub corr_anchor: Vec<[f64; 3]>,
    pub alpha_action: Vec<f64>,
    pub alpha_anchor: Vec<f64>,
    pub goal_flow: Vec<[f64; 3]>,
    pub blend: f64,
    pub gt_rotation: [f64; 9],
    pub gt_translation: [f64; 3],
}

fn to_rows(points: &[Vector3<f64>]) -> Vec<[f64; 3]> {
    points.iter().map(|p| [p.x, p.y, p.z]).collect()
}

fn from_rows(rows: &[[f64; 3]]) -> Vec<Vector3<f64>> {
    rows.iter().map(|r| Vector3::new(r[0], r[1], r[2])).collect()
}

impl ScenarioFile {
    pub fn from_bundle(bundle: &ScenarioBundle) -> Self {
        let p = &bundle.problem;
        ScenarioFile {
            version: SCENARIO_VERSION,
            kind: bundle.kind.as_str().to_string(),
            seed: bundle.seed,
            noise_sigma: bundle.noise_sigma,
            action_points: to_rows(p.action_cloud().points()),
            anchor_points: to_rows(p.anchor_cloud().points()),
            corr_action: to_rows(p.corr_action()),
            corr_anchor: to_rows(p.corr_anchor()),
            alpha_action: p.alpha_action().to_vec(),
            alpha_anchor: p.alpha_anchor().to_vec(),
            goal_flow: to_rows(p.goal_flow()),
            blend: p.blend(),
            gt_rotation: bundle.gt.rotation_row_major(),
            gt_translation: bundle.gt.translation_array(),
        }
    }

    pub fn to_bundle(&self) -> Result<ScenarioBundle> {
        if self.version != SCENARIO_VERSION {
            return Err(Error::UnsupportedVersion(self.version));
        }
        let kind: ScenarioKind = self.kind.parse()?;
        let problem = CrossPoseProblem::new(
            PointCloud::new(from_rows(&self.action_points))?,
            PointCloud::new(from_rows(&self.anchor_points))?,
            from_rows(&self.corr_action),
            from_rows(&self.corr_anchor),
            self.alpha_action.clone(),
            self.alpha_anchor.clone(),
            from_rows(&self.goal_flow),
            self.blend,
        )?;
        let gt = RigidTransform::from_row_major(&self.gt_rotation, &self.gt_translation)?;
        Ok(ScenarioBundle {
            problem,
            gt,
            kind,
            seed: self.seed,
            noise_sigma: self.noise_sigma,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub fn read_scenario(path: &Path) -> Result<ScenarioFile> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioFile::from_json(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Writes through a temp file in the same directory, then renames, so a
/// failed write never leaves a partial scenario behind.
pub fn write_scenario(path: &Path, file: &ScenarioFile) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(file.to_json().as_bytes()).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// One evaluation row: a scenario solved at one (w, mode) grid point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scenario_id: String,
    pub kind: String,
    pub w: f64,
    pub mode: String,
    pub rot_err_deg: f64,
    pub trans_err: f64,
    pub pp_mse: f64,
    pub objective: f64,
    pub oracle_gap: f64,
}

/// A metrics row from a corruption sweep; same columns plus the corruption
/// name and level.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario_id: String,
    pub kind: String,
    pub w: f64,
    pub mode: String,
    pub rot_err_deg: f64,
    pub trans_err: f64,
    pub pp_mse: f64,
    pub objective: f64,
    pub oracle_gap: f64,
    pub corruption: String,
    pub level: f64,
}

impl SweepRow {
    pub fn new(row: MetricsRow, corruption: String, level: f64) -> Self {
        SweepRow {
            scenario_id: row.scenario_id,
            kind: row.kind,
            w: row.w,
            mode: row.mode,
            rot_err_deg: row.rot_err_deg,
            trans_err: row.trans_err,
            pp_mse: row.pp_mse,
            objective: row.objective,
            oracle_gap: row.oracle_gap,
            corruption,
            level,
        }
    }
}

pub fn write_metrics_csv<W: Write, S: Serialize>(writer: W, rows: &[S]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for row in rows {
        out.serialize(row).map_err(|e| Error::Io {
            path: "<csv>".to_string(),
            source: std::io::Error::other(e),
        })?;
    }
    out.flush().map_err(|e| Error::Io {
        path: "<csv>".to_string(),
        source: e,
    })?;
    Ok(())
}
