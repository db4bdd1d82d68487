//! Step-size convergence study against a fine-step reference run.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use super::metric::{error_metric, fit_slope, Trajectory};
use super::run::{run, RunOptions, TrajectoryLog};
use super::{Scene, SceneSpec};
use crate::error::{Error, Result};
use crate::mesh::io::fmt17;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub error: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub h_ref: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Log-log slope of error against h; absent with fewer than two rows.
    pub slope: Option<f64>,
    /// Steps that ended with a solver diagnostic, over all runs.
    pub diagnostics: usize,
    pub descent_violations: usize,
}

impl ConvergenceReport {
    /// `convergence.csv` contents.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,error,wall_ms\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", fmt17(r.h), fmt17(r.error), fmt17(r.wall_ms));
        }
        out
    }
}

fn timed_run(spec: &SceneSpec, base: &Path, h: f64) -> Result<(Trajectory, TrajectoryLog, f64)> {
    let mut spec = spec.clone();
    spec.solver.h = h;
    let scene = Scene::build(spec, base)?;
    let start = Instant::now();
    let mut log = run(
        &scene,
        &RunOptions {
            record: true,
            ..RunOptions::default()
        },
    )?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((std::mem::take(&mut log.trajectory), log, wall_ms))
}

/// Runs the reference at `h_ref` and then each entry of `h_list`, one after
/// another so the wall-clock column is not distorted by sharing cores.
pub fn convergence(spec: &SceneSpec, base: &Path, h_list: &[f64], h_ref: f64) -> Result<ConvergenceReport> {
    if h_list.is_empty() {
        return Err(Error::InvalidScene("empty step-size list".into()));
    }
    for &h in h_list {
        let ratio = h / h_ref;
        if !(h > 0.0) || (ratio - ratio.round()).abs() > 1e-9 * ratio || ratio.round() < 1.0 {
            return Err(Error::InvalidScene(format!(
                "step size {h} is not a multiple of the reference step {h_ref}"
            )));
        }
    }
    let (reference, ref_log, _) = timed_run(spec, base, h_ref)?;
    let mut diagnostics = ref_log.diagnostics();
    let mut descent_violations = ref_log.descent_violations();
    let mut rows = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let (traj, log, wall_ms) = timed_run(spec, base, h)?;
        diagnostics += log.diagnostics();
        descent_violations += log.descent_violations();
        rows.push(ConvergenceRow {
            h,
            error: error_metric(&traj, &reference, h, spec.duration)?,
            wall_ms,
        });
    }
    let slope = fit_slope(&rows.iter().map(|r| (r.h, r.error)).collect::<Vec<_>>());
    Ok(ConvergenceReport {
        h_ref,
        rows,
        slope,
        diagnostics,
        descent_violations,
    })
}
