use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ObstacleKind, Vec2, WorldState, CONTROL_DT, ROBOT_RADIUS};

/// An obstacle within this distance of its waypoint draws a new one.
const WAYPOINT_REACHED: f64 = 0.5;
/// New waypoints keep this margin from the field walls.
const WAYPOINT_MARGIN: f64 = 1.0;

/// Helbing-style social force constants plus the reactive-stop look-ahead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SfmParams {
    /// Relaxation time toward the desired velocity, s.
    pub relaxation_time: f64,
    /// Repulsion amplitude, m/s^2.
    pub repulsion_amplitude: f64,
    /// Repulsion range, m.
    pub repulsion_range: f64,
    /// Constant-velocity look-ahead of the reactive stop model, s.
    pub rsm_horizon: f64,
}

impl Default for SfmParams {
    fn default() -> Self {
        Self {
            relaxation_time: 0.5,
            repulsion_amplitude: 2.0,
            repulsion_range: 0.5,
            rsm_horizon: 3.0,
        }
    }
}

fn unit_or_zero(v: Vec2) -> Vec2 {
    let n = v.norm();
    if n > 1e-12 {
        v / n
    } else {
        Vec2::zeros()
    }
}

/// Minimum separation over `[0, horizon]` of two points moving at constant velocity.
pub(crate) fn closest_approach(rel_pos: Vec2, rel_vel: Vec2, horizon: f64) -> f64 {
    let vv = rel_vel.norm_squared();
    let t = if vv > 1e-15 {
        (-rel_pos.dot(&rel_vel) / vv).clamp(0.0, horizon)
    } else {
        0.0
    };
    (rel_pos + rel_vel * t).norm()
}

impl WorldState {
    /// Advances every obstacle one control interval. The clock is owned by `step_robot`.
    ///
    /// Forces are evaluated on the pre-step snapshot so update order does not matter.
    pub fn step_obstacles(&mut self) {
        let params = self.sfm;
        let robot_pos = self.robot_position();
        let robot_vel = self.robot.velocity_vector();
        let snapshot: Vec<(Vec2, f64)> = self
            .obstacles
            .iter()
            .map(|o| (o.position, o.radius))
            .collect();

        let mut next_velocity = Vec::with_capacity(self.obstacles.len());
        for (i, o) in self.obstacles.iter().enumerate() {
            let v = match o.kind {
                ObstacleKind::Static => Vec2::zeros(),
                ObstacleKind::Sfm => {
                    let desired = unit_or_zero(o.waypoint - o.position) * o.desired_speed;
                    let mut force = (desired - o.velocity) / params.relaxation_time;
                    let mut repel = |other: Vec2, other_radius: f64| {
                        let diff = o.position - other;
                        let d = diff.norm();
                        if d > 1e-12 {
                            let magnitude = params.repulsion_amplitude
                                * ((o.radius + other_radius - d) / params.repulsion_range).exp();
                            force += diff / d * magnitude;
                        }
                    };
                    repel(robot_pos, ROBOT_RADIUS);
                    for (j, &(p, r)) in snapshot.iter().enumerate() {
                        if j != i {
                            repel(p, r);
                        }
                    }
                    let mut v = o.velocity + force * CONTROL_DT;
                    let speed = v.norm();
                    if speed > o.desired_speed {
                        v *= o.desired_speed / speed;
                    }
                    v
                }
                ObstacleKind::Rsm => {
                    let cruise = unit_or_zero(o.waypoint - o.position) * o.desired_speed;
                    let gap = closest_approach(
                        o.position - robot_pos,
                        cruise - robot_vel,
                        params.rsm_horizon,
                    );
                    if gap < o.radius + ROBOT_RADIUS {
                        Vec2::zeros()
                    } else {
                        cruise
                    }
                }
            };
            next_velocity.push(v);
        }

        let half = self.map.field_half_extent - WAYPOINT_MARGIN;
        for (o, v) in self.obstacles.iter_mut().zip(next_velocity) {
            o.velocity = v;
            if o.kind == ObstacleKind::Static {
                continue;
            }
            o.position += v * CONTROL_DT;
            if (o.waypoint - o.position).norm() < WAYPOINT_REACHED {
                o.waypoint = Vec2::new(
                    self.rng.random_range(-half..half),
                    self.rng.random_range(-half..half),
                );
            }
        }
    }
}
