//! Trace verification by re-simulation, and plot-ready trajectory export.

use std::path::Path;

use serde::Serialize;

use crate::env::{Action, EpisodeResult, EpisodeTrace, ReplanEnv};
use crate::error::{ReplanError, Result};

/// Trajectory rows are kept every this many ticks, plus the final tick.
pub const PLOT_EVERY_TICKS: u64 = 5;

/// First body line of a trace file; line 1 is the header, line 2 the column names.
const FIRST_RECORD_LINE: usize = 3;

/// Re-simulates the recorded seed with the recorded actions and checks every
/// tick record bit for bit.
pub fn verify_trace(trace: &EpisodeTrace) -> Result<EpisodeResult> {
    let mut env = ReplanEnv::new(trace.header.settings.clone())?;
    env.set_record_trace(true);
    env.reset(trace.header.seed)?;
    let actions = trace.actions();
    for (k, &a) in actions.iter().enumerate() {
        if env.is_done() {
            return Err(ReplanError::TraceMismatch {
                line: first_line_of_decision(trace, k),
                detail: format!("episode ended before decision {k}"),
            });
        }
        env.step(a)?;
    }
    let result = env.result().ok_or_else(|| ReplanError::TraceMismatch {
        line: FIRST_RECORD_LINE + trace.records.len(),
        detail: "trace ends before the episode does".into(),
    })?;
    let fresh = env
        .take_trace(&trace.header.policy)
        .expect("trace recording was on");
    for (i, (a, b)) in trace.records.iter().zip(&fresh.records).enumerate() {
        let (la, lb) = (EpisodeTrace::record_line(a), EpisodeTrace::record_line(b));
        if la != lb {
            return Err(ReplanError::TraceMismatch {
                line: FIRST_RECORD_LINE + i,
                detail: format!("recorded `{la}`, recomputed `{lb}`"),
            });
        }
    }
    if trace.records.len() != fresh.records.len() {
        return Err(ReplanError::TraceMismatch {
            line: FIRST_RECORD_LINE + trace.records.len().min(fresh.records.len()),
            detail: format!(
                "{} records in the trace, {} recomputed",
                trace.records.len(),
                fresh.records.len()
            ),
        });
    }
    Ok(result)
}

fn first_line_of_decision(trace: &EpisodeTrace, k: usize) -> usize {
    let i = trace
        .records
        .iter()
        .position(|r| r.decision as usize == k)
        .unwrap_or(trace.records.len());
    FIRST_RECORD_LINE + i
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotRow {
    /// `robot`, `obstacle` or `replan`.
    pub kind: &'static str,
    /// Obstacle index; 0 for the robot and for markers.
    pub id: usize,
    pub sim_time: f64,
    pub x: f64,
    pub y: f64,
}

/// Robot and obstacle positions resampled every `PLOT_EVERY_TICKS`, and one marker
/// per replan step at the first tick of that step.
pub fn plot_rows(trace: &EpisodeTrace) -> Vec<PlotRow> {
    let mut rows = Vec::new();
    let last = trace.records.last().map(|r| r.tick);
    for r in &trace.records {
        if r.tick % PLOT_EVERY_TICKS != 0 && Some(r.tick) != last {
            continue;
        }
        rows.push(PlotRow {
            kind: "robot",
            id: 0,
            sim_time: r.sim_time,
            x: r.robot.pose.x,
            y: r.robot.pose.y,
        });
        for (k, o) in r.obstacles.iter().enumerate() {
            rows.push(PlotRow {
                kind: "obstacle",
                id: k,
                sim_time: r.sim_time,
                x: o.x,
                y: o.y,
            });
        }
    }
    let mut seen = None;
    for r in &trace.records {
        if r.action == Action::Replan && seen != Some(r.decision) {
            seen = Some(r.decision);
            rows.push(PlotRow {
                kind: "replan",
                id: 0,
                sim_time: r.sim_time,
                x: r.robot.pose.x,
                y: r.robot.pose.y,
            });
        }
    }
    rows
}

pub fn write_plot(trace: &EpisodeTrace, path: &Path) -> Result<()> {
    let err = |e: csv::Error| ReplanError::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for row in plot_rows(trace) {
        w.serialize(row).map_err(err)?;
    }
    w.flush().map_err(|e| ReplanError::io(path, e))
}
