//! Local planners: reference path + robot state + costmap to a velocity command.

pub mod dwa;
pub mod mpc;
pub mod window;

use serde::{Deserialize, Serialize};

pub use dwa::{dwa_command, dynamic_window, DwaEvaluation, DynamicWindow};
pub use mpc::{mpc_command, MpcState};
pub use window::PathWindow;

use crate::error::{ReplanError, Result};
use crate::global::{Costmap, ReferencePath};
use crate::world::{integrate_unicycle, ControlCommand, Pose2D, RobotState, Vec2, CONTROL_DT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalPlannerConfig {
    pub accel_limit: f64,
    pub ang_accel_limit: f64,
    pub dwa_horizon: f64,
    pub mpc_horizon: f64,
    pub dwa_v_samples: usize,
    pub dwa_omega_samples: usize,
    pub mpc_rollouts: usize,
    pub mpc_segments: usize,
    pub mpc_v_noise: f64,
    pub mpc_omega_noise: f64,
    pub w_track: f64,
    pub w_clear: f64,
    pub w_speed: f64,
    /// Reward per metre of progress along the path window (DWA).
    pub w_progress: f64,
    /// Penalty on the end-of-rollout heading error relative to the window end.
    pub w_heading: f64,
    /// Clearance reward saturates here.
    pub clearance_cap: f64,
    pub collision_penalty: f64,
    /// Rollout points must keep this much more than the robot radius from pillars and walls.
    pub safety_margin: f64,
    /// Extra window length beyond what the horizon can cover at full speed.
    pub window_margin: f64,
}

impl Default for LocalPlannerConfig {
    fn default() -> Self {
        Self {
            accel_limit: 2.0,
            ang_accel_limit: 2.0,
            dwa_horizon: 2.0,
            mpc_horizon: 3.0,
            dwa_v_samples: 11,
            dwa_omega_samples: 21,
            mpc_rollouts: 64,
            mpc_segments: 3,
            mpc_v_noise: 0.3,
            mpc_omega_noise: 0.5,
            w_track: 1.0,
            w_clear: 1.0,
            w_speed: 0.3,
            w_progress: 1.0,
            w_heading: 0.5,
            clearance_cap: 1.0,
            collision_penalty: 1000.0,
            safety_margin: 0.05,
            window_margin: 1.0,
        }
    }
}

impl LocalPlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("accel_limit", self.accel_limit),
            ("ang_accel_limit", self.ang_accel_limit),
            ("dwa_horizon", self.dwa_horizon),
            ("mpc_horizon", self.mpc_horizon),
            ("w_track", self.w_track),
            ("w_clear", self.w_clear),
            ("w_speed", self.w_speed),
            ("clearance_cap", self.clearance_cap),
            ("collision_penalty", self.collision_penalty),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ReplanError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.w_heading < 0.0
            || self.w_progress < 0.0
            || self.mpc_v_noise < 0.0
            || self.mpc_omega_noise < 0.0
            || self.window_margin < 0.0
            || self.safety_margin < 0.0
        {
            return Err(ReplanError::Config(
                "weights, noise and margins must be non-negative".into(),
            ));
        }
        if self.dwa_v_samples < 2 || self.dwa_omega_samples < 2 {
            return Err(ReplanError::Config(
                "DWA needs at least 2 samples per axis".into(),
            ));
        }
        if self.mpc_rollouts < 1 || self.mpc_segments < 1 {
            return Err(ReplanError::Config(
                "MPC needs at least one rollout and one segment".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LocalPlannerKind {
    Dwa,
    Mpc,
}

impl std::fmt::Display for LocalPlannerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LocalPlannerKind::Dwa => "dwa",
            LocalPlannerKind::Mpc => "mpc",
        })
    }
}

/// Local planner with its per-episode state.
#[derive(Debug, Clone)]
pub enum LocalPlanner {
    Dwa,
    Mpc(Box<MpcState>),
}

impl LocalPlanner {
    pub fn new(kind: LocalPlannerKind, seed: u64, cfg: &LocalPlannerConfig) -> Self {
        match kind {
            LocalPlannerKind::Dwa => LocalPlanner::Dwa,
            LocalPlannerKind::Mpc => LocalPlanner::Mpc(Box::new(MpcState::new(seed, cfg))),
        }
    }

    pub fn kind(&self) -> LocalPlannerKind {
        match self {
            LocalPlanner::Dwa => LocalPlannerKind::Dwa,
            LocalPlanner::Mpc(_) => LocalPlannerKind::Mpc,
        }
    }

    pub fn command(
        &mut self,
        path: &ReferencePath,
        robot: &RobotState,
        costmap: &Costmap,
        cfg: &LocalPlannerConfig,
    ) -> ControlCommand {
        match self {
            LocalPlanner::Dwa => dwa_command(path, robot, costmap, cfg),
            LocalPlanner::Mpc(state) => mpc_command(path, robot, costmap, cfg, state),
        }
    }
}

/// Poses after each control interval of a piecewise-constant command sequence.
pub fn rollout(start: Pose2D, commands: impl IntoIterator<Item = ControlCommand>) -> Vec<Pose2D> {
    let mut pose = start;
    commands
        .into_iter()
        .map(|c| {
            pose = integrate_unicycle(pose, c.v, c.omega, CONTROL_DT);
            pose
        })
        .collect()
}

/// Indices of rollout points that count as collisions.
///
/// A point collides when its cell is occupied. When the robot already
/// starts in an occupied cell the leading occupied prefix is forgiven so
/// that escape motions are not ruled out; a rollout that never gets clear
/// still collides everywhere. Pillars and walls are also checked exactly,
/// with `margin` to spare, so that escaping a scanned obstacle never
/// excuses cutting through a pillar.
pub fn colliding_steps(costmap: &Costmap, start: Vec2, points: &[Vec2], margin: f64) -> Vec<usize> {
    let grid = prefix_hits(
        costmap.is_free(start),
        points.iter().map(|&p| costmap.is_free(p)),
    );
    let fixed = prefix_hits(
        costmap.static_clear_within(start, margin),
        points
            .iter()
            .map(|&p| costmap.static_clear_within(p, margin)),
    );
    let mut hits: Vec<usize> = grid.into_iter().chain(fixed).collect();
    hits.sort_unstable();
    hits.dedup();
    hits
}

fn prefix_hits(start_clear: bool, clear: impl ExactSizeIterator<Item = bool>) -> Vec<usize> {
    let n = clear.len();
    let mut escaping = !start_clear;
    let mut hits = Vec::new();
    for (i, ok) in clear.enumerate() {
        if escaping {
            if ok {
                escaping = false;
            }
            continue;
        }
        if !ok {
            hits.push(i);
        }
    }
    if escaping {
        return (0..n).collect();
    }
    hits
}

pub(crate) fn horizon_steps(horizon: f64) -> usize {
    (horizon / CONTROL_DT).round().max(1.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_rejects_bad_values() {
        LocalPlannerConfig::default().validate().unwrap();
        let bad = LocalPlannerConfig {
            dwa_v_samples: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(serde_json::from_str::<LocalPlannerConfig>(r#"{"horizon": 2}"#).is_err());
    }

    #[test]
    fn escape_prefix_is_forgiven_only_from_occupied_start() {
        let mut occ = vec![false; 100];
        occ[0] = true;
        occ[1] = true;
        let cm = Costmap::from_occupancy(10, 10, 1.0, Vec2::zeros(), occ);
        let out = [
            Vec2::new(1.5, 0.5),
            Vec2::new(2.5, 0.5),
            Vec2::new(1.5, 0.5),
        ];
        assert_eq!(
            colliding_steps(&cm, Vec2::new(0.5, 0.5), &out, 0.0),
            vec![2]
        );
        assert_eq!(
            colliding_steps(&cm, Vec2::new(5.5, 5.5), &out, 0.0),
            vec![0, 2]
        );
        let stuck = [Vec2::new(0.5, 0.5), Vec2::new(1.5, 0.5)];
        assert_eq!(
            colliding_steps(&cm, Vec2::new(0.5, 0.5), &stuck, 0.0),
            vec![0, 1]
        );
    }

    #[test]
    fn escaping_a_scanned_obstacle_does_not_excuse_pillar_cells() {
        let map = crate::world::PrebuiltMap::new(crate::world::MapKind::Sixteen, 20.0);
        let mut cm = Costmap::from_map(&map);
        // robot inside a scanned disc, in the corridor between the pillars at (-6, -6) and (-6, -2)
        let start = Vec2::new(-6.0, -3.8);
        cm.fill_disc(start, 1.3);
        let pts = [
            Vec2::new(-6.0, -4.3),
            Vec2::new(-6.0, -4.6),
            Vec2::new(-4.0, -4.0),
        ];
        assert_eq!(colliding_steps(&cm, start, &pts, 0.0), vec![1]);
        let away = [Vec2::new(-5.5, -4.0), Vec2::new(-4.0, -4.0)];
        assert!(colliding_steps(&cm, start, &away, 0.25).is_empty());
    }
}
