//! Per-tick episode traces: one JSON header line, then CSV records.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Action, EnvSettings};
use crate::error::{ReplanError, Result};
use crate::world::{RobotState, Vec2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub settings: EnvSettings,
    pub seed: u64,
    pub policy: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Index of the decision step this tick belongs to.
    pub decision: u64,
    pub action: Action,
    pub tick: u64,
    pub sim_time: f64,
    pub robot: RobotState,
    pub obstacles: Vec<Vec2>,
    /// The new reference path was in force for this tick.
    pub replanned: bool,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl TraceRecord {
    fn fields(&self) -> Vec<String> {
        let mut f = vec![
            self.decision.to_string(),
            self.action.index().to_string(),
            self.tick.to_string(),
            self.sim_time.to_string(),
            self.robot.pose.x.to_string(),
            self.robot.pose.y.to_string(),
            self.robot.pose.theta.to_string(),
            self.robot.v.to_string(),
            self.robot.omega.to_string(),
        ];
        for o in &self.obstacles {
            f.push(o.x.to_string());
            f.push(o.y.to_string());
        }
        f.push(u8::from(self.replanned).to_string());
        f.push(self.reward.to_string());
        f.push(u8::from(self.terminated).to_string());
        f.push(u8::from(self.truncated).to_string());
        f
    }

    fn parse(fields: &[&str], n_obstacles: usize, line: usize) -> Result<Self> {
        let bad = |what: &str| ReplanError::TraceMismatch {
            line,
            detail: format!("unparsable {what}"),
        };
        if fields.len() != 13 + 2 * n_obstacles {
            return Err(ReplanError::TraceMismatch {
                line,
                detail: format!(
                    "expected {} fields, found {}",
                    13 + 2 * n_obstacles,
                    fields.len()
                ),
            });
        }
        let f = |i: usize, what: &str| fields[i].parse::<f64>().map_err(|_| bad(what));
        let u = |i: usize, what: &str| fields[i].parse::<u64>().map_err(|_| bad(what));
        let flag = |i: usize, what: &str| match fields[i] {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad(what)),
        };
        let action = Action::from_index(u(1, "action")? as usize).ok_or_else(|| bad("action"))?;
        let obstacles = (0..n_obstacles)
            .map(|k| {
                Ok(Vec2::new(
                    f(9 + 2 * k, "obstacle x")?,
                    f(10 + 2 * k, "obstacle y")?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let tail = 9 + 2 * n_obstacles;
        Ok(Self {
            decision: u(0, "decision")?,
            action,
            tick: u(2, "tick")?,
            sim_time: f(3, "sim_time")?,
            robot: RobotState {
                pose: crate::world::Pose2D {
                    x: f(4, "robot_x")?,
                    y: f(5, "robot_y")?,
                    theta: f(6, "robot_theta")?,
                },
                v: f(7, "v")?,
                omega: f(8, "omega")?,
            },
            obstacles,
            replanned: flag(tail, "replanned")?,
            reward: f(tail + 1, "reward")?,
            terminated: flag(tail + 2, "terminated")?,
            truncated: flag(tail + 3, "truncated")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

fn columns(n_obstacles: usize) -> Vec<String> {
    let mut c: Vec<String> = [
        "decision",
        "action",
        "tick",
        "sim_time",
        "robot_x",
        "robot_y",
        "robot_theta",
        "v",
        "omega",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for k in 0..n_obstacles {
        c.push(format!("obs{k}_x"));
        c.push(format!("obs{k}_y"));
    }
    c.extend(
        ["replanned", "reward", "terminated", "truncated"]
            .iter()
            .map(|s| s.to_string()),
    );
    c
}

impl EpisodeTrace {
    pub fn n_obstacles(&self) -> usize {
        self.header.settings.scenario.n_obstacles
    }

    /// Actions in decision order, recovered from the per-tick records.
    pub fn actions(&self) -> Vec<Action> {
        let mut out: Vec<Action> = Vec::new();
        for r in &self.records {
            if r.decision as usize == out.len() {
                out.push(r.action);
            }
        }
        out
    }

    /// CSV text of one record, as written to the trace body.
    pub fn record_line(record: &TraceRecord) -> String {
        record.fields().join(",")
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let header = serde_json::to_string(&self.header).map_err(std::io::Error::other)?;
        writeln!(w, "{header}")?;
        writeln!(w, "{}", columns(self.n_obstacles()).join(","))?;
        for r in &self.records {
            writeln!(w, "{}", Self::record_line(r))?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let io = |e: std::io::Error| ReplanError::TraceMismatch {
            line: 0,
            detail: e.to_string(),
        };
        let (_, first) = lines.next().ok_or(ReplanError::TraceMismatch {
            line: 1,
            detail: "empty trace".into(),
        })?;
        let header: TraceHeader =
            serde_json::from_str(&first.map_err(io)?).map_err(|e| ReplanError::TraceMismatch {
                line: 1,
                detail: format!("bad header: {e}"),
            })?;
        let n = header.settings.scenario.n_obstacles;
        match lines.next() {
            Some((_, Ok(cols))) if cols == columns(n).join(",") => {}
            _ => {
                return Err(ReplanError::TraceMismatch {
                    line: 2,
                    detail: "unexpected column header".into(),
                })
            }
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(io)?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            records.push(TraceRecord::parse(&fields, n, i + 1)?);
        }
        Ok(Self { header, records })
    }
}
