use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::dwa::heading_error;
use super::window::PathWindow;
use super::{colliding_steps, horizon_steps, rollout, LocalPlannerConfig};
use crate::global::{Costmap, ReferencePath};
use crate::world::{ControlCommand, Pose2D, RobotState, Vec2, MAX_ANGULAR_SPEED, MAX_LINEAR_SPEED};

/// Warm start and noise stream of one episode's MPC.
#[derive(Debug, Clone)]
pub struct MpcState {
    pub previous: Vec<ControlCommand>,
    /// Cost of the chosen sequence at the last call.
    pub last_cost: Option<f64>,
    rng: ChaCha8Rng,
}

impl MpcState {
    pub fn new(seed: u64, _cfg: &LocalPlannerConfig) -> Self {
        Self {
            previous: Vec::new(),
            last_cost: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

fn limit(c: ControlCommand) -> ControlCommand {
    ControlCommand::new(
        c.v.clamp(0.0, MAX_LINEAR_SPEED),
        c.omega.clamp(-MAX_ANGULAR_SPEED, MAX_ANGULAR_SPEED),
    )
}

pub fn mpc_window(
    path: &ReferencePath,
    robot: &RobotState,
    cfg: &LocalPlannerConfig,
) -> PathWindow {
    PathWindow::new(
        path,
        robot.pose.position(),
        cfg.mpc_horizon * MAX_LINEAR_SPEED + cfg.window_margin,
    )
}

/// Cold-start guess: turn towards the window end within one segment, slowing
/// down with the heading error.
fn pursuit_nominal(
    robot: &RobotState,
    window: &PathWindow,
    cfg: &LocalPlannerConfig,
) -> ControlCommand {
    let err = heading_error(&robot.pose, window.end());
    let segment = cfg.mpc_horizon / cfg.mpc_segments as f64;
    limit(ControlCommand::new(
        MAX_LINEAR_SPEED * err.cos().max(0.0),
        err / segment,
    ))
}

/// Tracking + remaining arc length at the terminal point + per-step collision penalty.
pub fn sequence_cost(
    sequence: &[ControlCommand],
    robot: &RobotState,
    window: &PathWindow,
    costmap: &Costmap,
    cfg: &LocalPlannerConfig,
) -> f64 {
    let total = horizon_steps(cfg.mpc_horizon);
    let per_segment = total.div_ceil(sequence.len());
    let commands = (0..total).map(|k| sequence[(k / per_segment).min(sequence.len() - 1)]);
    let poses = rollout(robot.pose, commands);
    let points: Vec<Vec2> = poses.iter().map(Pose2D::position).collect();
    let tracking = points.iter().map(|&p| window.distance(p)).sum::<f64>() / points.len() as f64;
    let terminal = window.remaining_from(*points.last().expect("non-empty rollout"));
    let hits = colliding_steps(costmap, robot.pose.position(), &points, cfg.safety_margin).len();
    cfg.w_track * tracking + terminal + cfg.collision_penalty * hits as f64
}

/// Samples command sequences around the previous solution and returns the
/// first command of the cheapest one. The previous solution itself is always
/// the first candidate.
pub fn mpc_command(
    path: &ReferencePath,
    robot: &RobotState,
    costmap: &Costmap,
    cfg: &LocalPlannerConfig,
    state: &mut MpcState,
) -> ControlCommand {
    let window = mpc_window(path, robot, cfg);
    if state.previous.len() != cfg.mpc_segments {
        state.previous = vec![pursuit_nominal(robot, &window, cfg); cfg.mpc_segments];
    }
    let v_noise = Normal::new(0.0, cfg.mpc_v_noise).expect("finite std");
    let w_noise = Normal::new(0.0, cfg.mpc_omega_noise).expect("finite std");

    let mut best_seq: Vec<ControlCommand> = state.previous.iter().copied().map(limit).collect();
    let mut best_cost = sequence_cost(&best_seq, robot, &window, costmap, cfg);
    for _ in 1..cfg.mpc_rollouts {
        let candidate: Vec<ControlCommand> = state
            .previous
            .iter()
            .map(|c| {
                limit(ControlCommand::new(
                    c.v + v_noise.sample(&mut state.rng),
                    c.omega + w_noise.sample(&mut state.rng),
                ))
            })
            .collect();
        let cost = sequence_cost(&candidate, robot, &window, costmap, cfg);
        if cost < best_cost {
            best_cost = cost;
            best_seq = candidate;
        }
    }
    let first = best_seq[0];
    state.previous = best_seq;
    state.last_cost = Some(best_cost);
    first
}
